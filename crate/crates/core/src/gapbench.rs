//! Optimality-gap measurement: training vs generalization gap, empirical
//! PAC epsilon, the K and M sweeps, and the loss-mismatch demonstrations.
//!
//! Sweeps are split into independent cells (`run_k_cell`, `run_m_cell`) so a
//! caller can run them in parallel, then assembled in cell-index order.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layers::Stack;
use crate::models::{GnnConfig, GnnModel, MlpModel, PowerModel, Standardizer};
use crate::netgen::{gen_dataset, instance_key, permute_values, sample_instance, ChannelModel, Dataset, NetworkInstance};
use crate::oracles::{extreme_instance, power_iteration, sum_rate, EigenProblem, OracleName};
use crate::rng::SeedKey;
use crate::tensor::Tensor;
use crate::training::{loss_supervised, train, Optimizer, OptimizerKind, TrainConfig};
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapReport {
    /// Mean relative gap `(oracle − model) / oracle` over the training set.
    pub train_gap: f64,
    /// `total_gap − train_gap`.
    pub gen_gap: f64,
    /// Mean relative gap over the test set.
    pub total_gap: f64,
    pub oracle_name: OracleName,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: SeedKey,
}

/// Mean of `1 − model_rate / oracle_rate`. Oracle rates are recomputed from
/// the label powers; instances where the oracle rate is zero are skipped.
pub fn mean_relative_gap<M: PowerModel + ?Sized>(model: &M, data: &Dataset) -> Result<f64> {
    let labels = data.labels.as_ref().ok_or_else(|| Error::config("gap measurement needs labelled data"))?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, (inst, label)) in data.instances.iter().zip(labels).enumerate() {
        let oracle = sum_rate(inst, label).map_err(|e| e.at_index(i))?;
        if oracle <= 0.0 {
            continue;
        }
        let p = model.forward(inst).map_err(|e| e.at_index(i))?;
        total += 1.0 - sum_rate(inst, &p)? / oracle;
        count += 1;
    }
    if count == 0 {
        return Err(Error::domain("no instance with a positive oracle rate"));
    }
    Ok(total / count as f64)
}

pub fn measure_gaps<M: PowerModel + ?Sized>(
    model: &M,
    train_set: &Dataset,
    test_set: &Dataset,
    oracle_name: OracleName,
) -> Result<GapReport> {
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::domain("empty evaluation set"));
    }
    for set in [train_set, test_set] {
        if set.meta.oracle != oracle_name {
            return Err(Error::config(alloc::format!(
                "dataset labelled by {} but gaps requested against {}",
                set.meta.oracle,
                oracle_name
            )));
        }
    }
    let train_gap = mean_relative_gap(model, train_set)?;
    let total_gap = mean_relative_gap(model, test_set)?;
    Ok(GapReport {
        train_gap,
        gen_gap: total_gap - train_gap,
        total_gap,
        oracle_name,
        n_train: train_set.len(),
        n_test: test_set.len(),
        seed: train_set.meta.seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PacEstimate {
    pub delta: f64,
    pub epsilon_hat: f64,
    pub trials: usize,
    /// Sorted absolute rate differences, one per trial.
    pub differences: Vec<f64>,
}

/// Empirical `(1 − delta)`-quantile of sorted samples: the smallest value
/// not exceeded by at least a `1 − delta` fraction of them.
pub fn upper_quantile(sorted: &[f64], delta: f64) -> f64 {
    let n = sorted.len();
    let rank = ((1.0 - delta) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Absolute sum-rate difference between `model` and `oracle_name` on
/// `trials` fresh instances drawn from consecutive streams of `key`.
pub fn estimate_pac_epsilon<M: PowerModel + ?Sized>(
    model: &M,
    k: usize,
    channel_model: &ChannelModel,
    oracle_name: OracleName,
    delta: f64,
    trials: usize,
    key: SeedKey,
) -> Result<PacEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("delta must lie in (0, 1)"));
    }
    if trials < 100 {
        return Err(Error::domain("at least 100 trials are required"));
    }
    let mut differences = Vec::with_capacity(trials);
    for t in 0..trials {
        let trial = || -> Result<f64> {
            let inst = sample_instance(k, channel_model, instance_key(key, t))?;
            let oracle = oracle_name
                .solve(&inst)?
                .ok_or_else(|| Error::config("PAC estimation needs an oracle"))?;
            let p = model.forward(&inst)?;
            Ok((sum_rate(&inst, &oracle.p)? - sum_rate(&inst, &p)?).abs())
        };
        differences.push(trial().map_err(|e| e.at_index(t))?);
    }
    differences.sort_by(f64::total_cmp);
    Ok(PacEstimate { delta, epsilon_hat: upper_quantile(&differences, delta), trials, differences })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Least-squares slope of `ln y` against `ln x`. Absent for fewer than two
/// points or any nonpositive value.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Shared settings of the K and M sweeps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
    pub n_test: usize,
    pub channel_model: ChannelModel,
    pub oracle: OracleName,
    pub mlp_hidden: Vec<usize>,
    pub gnn: GnnConfig,
    /// Training settings; the seed field is replaced per cell.
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            n_test: 500,
            channel_model: ChannelModel::RayleighIid,
            oracle: OracleName::Wmmse,
            mlp_hidden: vec![128, 128],
            gnn: GnnConfig { num_rounds: 3, hidden_dim: 32, state_dim: 8, ..GnnConfig::default() },
            train: TrainConfig { epochs: 60, batch_size: 32, learning_rate: 3e-3, ..TrainConfig::default() },
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.seeds.len() < 3 {
            return Err(Error::config("sweeps need at least 3 seeds"));
        }
        if self.n_test == 0 {
            return Err(Error::config("n_test must be at least 1"));
        }
        if self.oracle == OracleName::None {
            return Err(Error::config("sweeps need an oracle"));
        }
        Ok(())
    }
}

const TAG_TRAIN: u64 = 0x7472_6169_6e00_0000;
const TAG_TEST: u64 = 0x7465_7374_0000_0000;
const TAG_INIT: u64 = 0x696e_6974_0000_0000;
const TAG_ORDER: u64 = 0x6f72_6465_7200_0000;

/// Keys of one (K, seed) cell: training data, test data, init, shuffling.
pub fn cell_keys(seed: u64, k: usize) -> [SeedKey; 4] {
    let base = SeedKey::new(seed, 0);
    [TAG_TRAIN, TAG_TEST, TAG_INIT, TAG_ORDER].map(|tag| base.derive(tag ^ k as u64))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CellOutcome {
    Done(GapReport),
    Failed(String),
}

impl CellOutcome {
    fn from_result(r: Result<GapReport>) -> Self {
        match r {
            Ok(g) => CellOutcome::Done(g),
            Err(e) => CellOutcome::Failed(e.to_string()),
        }
    }

    pub fn report(&self) -> Option<&GapReport> {
        match self {
            CellOutcome::Done(g) => Some(g),
            CellOutcome::Failed(_) => None,
        }
    }
}

fn train_and_measure<M: PowerModel>(mut model: M, train_set: &Dataset, test_set: &Dataset, config: &SweepConfig, order: SeedKey) -> Result<GapReport> {
    let train_config = TrainConfig { seed: order, ..config.train.clone() };
    let (params, _) = train(&model, train_set, &train_config)?;
    *model.params_mut() = params;
    measure_gaps(&model, train_set, test_set, config.oracle)
}

fn build_mlp(k: usize, config: &SweepConfig, train_set: &Dataset, init: SeedKey) -> Result<MlpModel> {
    let mut mlp = MlpModel::new(k, &config.mlp_hidden, init)?;
    mlp.set_standardizer(Standardizer::fit(&train_set.instances)?)?;
    Ok(mlp)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KCell {
    pub k: usize,
    pub seed: u64,
    pub mlp: CellOutcome,
    pub gnn: CellOutcome,
}

/// Trains an MLP and a GNN on the same `m_train` instances with `k` users and
/// measures both on the same test set.
pub fn run_k_cell(k: usize, seed: u64, m_train: usize, config: &SweepConfig) -> Result<KCell> {
    let [train_key, test_key, init, order] = cell_keys(seed, k);
    let train_set = gen_dataset(m_train, k, &config.channel_model, config.oracle, train_key)?;
    let test_set = gen_dataset(config.n_test, k, &config.channel_model, config.oracle, test_key)?;
    let mlp = build_mlp(k, config, &train_set, init)
        .and_then(|m| train_and_measure(m, &train_set, &test_set, config, order));
    let gnn = GnnModel::new(config.gnn.clone(), init)
        .and_then(|m| train_and_measure(m, &train_set, &test_set, config, order));
    Ok(KCell { k, seed, mlp: CellOutcome::from_result(mlp), gnn: CellOutcome::from_result(gnn) })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingRow {
    pub k: usize,
    /// Median total gap over successful seeds.
    pub gap_mlp: f64,
    pub gap_gnn: f64,
    /// `gap_mlp / gap_gnn`.
    pub ratio: f64,
    pub seeds_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Slope of `ln ratio` against `ln K`.
    pub fitted_ratio_exponent: Option<f64>,
    pub oracle: OracleName,
    pub m_train: usize,
    pub cells: Vec<KCell>,
    pub failures: Vec<String>,
}

fn check_ascending(values: &[usize], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(alloc::format!("{what} must not be empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(alloc::format!("{what} must be strictly ascending")));
    }
    if values[0] == 0 {
        return Err(Error::config(alloc::format!("{what} must be positive")));
    }
    Ok(())
}

/// Cells of a K-sweep in assembly order.
pub fn k_sweep_cells(ks: &[usize], config: &SweepConfig) -> Result<Vec<(usize, u64)>> {
    check_ascending(ks, "ks")?;
    config.validate()?;
    Ok(ks.iter().flat_map(|&k| config.seeds.iter().map(move |&s| (k, s))).collect())
}

/// Medians per K from cells in [`k_sweep_cells`] order.
pub fn assemble_scaling(ks: &[usize], m_train: usize, config: &SweepConfig, cells: Vec<KCell>) -> ScalingReport {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cell in &cells {
        for (arch, outcome) in [("mlp", &cell.mlp), ("gnn", &cell.gnn)] {
            if let CellOutcome::Failed(msg) = outcome {
                failures.push(alloc::format!("k={} seed={} arch={}: {}", cell.k, cell.seed, arch, msg));
            }
        }
    }
    for &k in ks {
        let mut mlp = Vec::new();
        let mut gnn = Vec::new();
        for cell in cells.iter().filter(|c| c.k == k) {
            if let (Some(a), Some(b)) = (cell.mlp.report(), cell.gnn.report()) {
                mlp.push(a.total_gap);
                gnn.push(b.total_gap);
            }
        }
        if let (Some(gap_mlp), Some(gap_gnn)) = (median(&mlp), median(&gnn)) {
            rows.push(ScalingRow { k, gap_mlp, gap_gnn, ratio: gap_mlp / gap_gnn, seeds_used: mlp.len() });
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ScalingReport { fitted_ratio_exponent: loglog_slope(&xs, &ys), rows, oracle: config.oracle, m_train, cells, failures }
}

/// Sequential K-sweep.
pub fn sweep_k(ks: &[usize], m_train: usize, config: &SweepConfig) -> Result<ScalingReport> {
    let cells = k_sweep_cells(ks, config)?
        .into_iter()
        .map(|(k, seed)| run_k_cell(k, seed, m_train, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_scaling(ks, m_train, config, cells))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MCell {
    pub m: usize,
    pub seed: u64,
    pub outcome: CellOutcome,
}

/// Trains a GNN on the first `m` instances of the seed's training stream and
/// measures it on the seed's test set. Every `m` of one seed shares the
/// initialization, the test set, and the nested training prefix.
pub fn run_m_cell(m: usize, k: usize, seed: u64, config: &SweepConfig) -> Result<MCell> {
    let [train_key, test_key, init, order] = cell_keys(seed, k);
    let train_set = gen_dataset(m, k, &config.channel_model, config.oracle, train_key)?;
    let test_set = gen_dataset(config.n_test, k, &config.channel_model, config.oracle, test_key)?;
    let outcome = GnnModel::new(config.gnn.clone(), init)
        .and_then(|g| train_and_measure(g, &train_set, &test_set, config, order));
    Ok(MCell { m, seed, outcome: CellOutcome::from_result(outcome) })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleComplexityRow {
    pub m: usize,
    /// Median generalization gap over successful seeds.
    pub gen_gap: f64,
    pub seeds_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleComplexityReport {
    pub k: usize,
    pub rows: Vec<SampleComplexityRow>,
    /// Slope of `ln gen_gap` against `ln M`.
    pub fitted_slope: Option<f64>,
    pub cells: Vec<MCell>,
    pub failures: Vec<String>,
}

pub fn m_sweep_cells(ms: &[usize], config: &SweepConfig) -> Result<Vec<(usize, u64)>> {
    check_ascending(ms, "ms")?;
    config.validate()?;
    Ok(ms.iter().flat_map(|&m| config.seeds.iter().map(move |&s| (m, s))).collect())
}

pub fn assemble_sample_complexity(ms: &[usize], k: usize, cells: Vec<MCell>) -> SampleComplexityReport {
    let failures = cells
        .iter()
        .filter_map(|c| match &c.outcome {
            CellOutcome::Failed(msg) => Some(alloc::format!("m={} seed={}: {}", c.m, c.seed, msg)),
            CellOutcome::Done(_) => None,
        })
        .collect();
    let rows: Vec<SampleComplexityRow> = ms
        .iter()
        .filter_map(|&m| {
            let gaps: Vec<f64> = cells.iter().filter(|c| c.m == m).filter_map(|c| c.outcome.report()).map(|g| g.gen_gap).collect();
            median(&gaps).map(|gen_gap| SampleComplexityRow { m, gen_gap, seeds_used: gaps.len() })
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gen_gap).collect();
    SampleComplexityReport { k, fitted_slope: loglog_slope(&xs, &ys), rows, cells, failures }
}

pub fn sweep_m(ms: &[usize], k: usize, config: &SweepConfig) -> Result<SampleComplexityReport> {
    let cells = m_sweep_cells(ms, config)?
        .into_iter()
        .map(|(m, seed)| run_m_cell(m, k, seed, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_sample_complexity(ms, k, cells))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerCandidate {
    pub p: Vec<f64>,
    pub mse: f64,
    pub sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerDemoReport {
    pub label: Vec<f64>,
    /// The label itself, then the two competing candidates.
    pub candidates: Vec<PowerCandidate>,
    /// The lower-MSE candidate has the lower sum rate.
    pub inversion_holds: bool,
}

/// Two outputs scored against the label `[1,1,0,0,0]` on the extreme
/// 5-user instance: the one closer in MSE has the lower sum rate.
pub fn demo_loss_mismatch_power() -> PowerDemoReport {
    let inst = extreme_instance();
    let label = vec![1.0, 1.0, 0.0, 0.0, 0.0];
    let candidates: Vec<PowerCandidate> = [label.clone(), vec![1.0, 1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0, 1.0]]
        .into_iter()
        .map(|p| PowerCandidate {
            mse: loss_supervised(&p, &label).expect("lengths match"),
            sum_rate: sum_rate(&inst, &p).expect("feasible"),
            p,
        })
        .collect();
    let (a, b) = (&candidates[1], &candidates[2]);
    let inversion_holds = (a.mse < b.mse) == (a.sum_rate < b.sum_rate);
    PowerDemoReport { label, candidates, inversion_holds }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenDemoConfig {
    /// Training matrices per seed.
    pub n_train: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Scale of the random Hermitian perturbation added to `diag(3, 1, ...)`.
    pub perturbation: f64,
}

impl Default for EigenDemoConfig {
    fn default() -> Self {
        Self { n_train: 32, hidden: vec![32], epochs: 300, learning_rate: 1e-2, perturbation: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenSeedResult {
    pub seed: u64,
    /// Mean `‖v̂‖` over the training matrices after two-label MSE training.
    pub supervised_norm: f64,
    /// `v̂ᴴRv̂ / λ_max` on `diag(3, 1, ...)` after unsupervised training.
    pub unsupervised_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenDemoReport {
    pub n_dim: usize,
    pub lambda_max: f64,
    pub per_seed: Vec<EigenSeedResult>,
    pub median_supervised_norm: f64,
    pub median_unsupervised_ratio: f64,
    pub failures: Vec<String>,
}

/// `diag(3, 1, ..., 1)`.
pub fn spiked_diagonal(n: usize) -> Vec<Complex64> {
    let mut r = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        r[i * n + i] = Complex64::new(if i == 0 { 3.0 } else { 1.0 }, 0.0);
    }
    r
}

fn perturbed_spike(n: usize, scale: f64, key: SeedKey) -> Vec<Complex64> {
    let mut r = spiked_diagonal(n);
    let mut s = key.stream();
    let a: Vec<Complex64> = (0..n * n).map(|_| s.complex_normal()).collect();
    let norm = scale / (2.0 * (n as f64).sqrt());
    for i in 0..n {
        for j in 0..n {
            r[i * n + j] += (a[i * n + j] + a[j * n + i].conj()) * norm;
        }
    }
    r
}

fn flatten(r: &[Complex64]) -> Vec<f64> {
    r.iter().map(|z| z.re).chain(r.iter().map(|z| z.im)).collect()
}

/// Real form of `v` as `[Re v; Im v]`.
fn to_complex(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect()
}

fn to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Full-batch training of `stack` with a per-sample `(loss, dloss/doutput)`.
fn fit_stack<F>(stack: &Stack, params: &mut [f64], inputs: &[Vec<f64>], epochs: usize, lr: f64, loss: F) -> Result<()>
where
    F: Fn(usize, &[f64]) -> (f64, Vec<f64>),
{
    let mut opt = Optimizer::new(OptimizerKind::AdaptiveMoment, lr, params.len());
    let mut grad = vec![0.0; params.len()];
    for epoch in 0..epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (i, x) in inputs.iter().enumerate() {
            let trace = stack.forward(params, x);
            let (l, up) = loss(i, trace.output());
            total += l;
            stack.backward(params, &trace, &up, &mut grad);
        }
        let scale = 1.0 / inputs.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        let mean = total * scale;
        if !mean.is_finite() || mean.abs() > 1e6 {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        opt.step(params, &grad);
    }
    Ok(())
}

fn eigen_seed(n: usize, seed: u64, config: &EigenDemoConfig, fixed: &EigenProblem, lambda_max: f64) -> Result<EigenSeedResult> {
    let base = SeedKey::new(seed, 0);
    let mats: Vec<Vec<Complex64>> =
        (0..config.n_train).map(|i| perturbed_spike(n, config.perturbation, instance_key(base.derive(TAG_TRAIN), i))).collect();
    let inputs: Vec<Vec<f64>> = mats.iter().map(|r| flatten(r)).collect();
    let targets = mats
        .iter()
        .map(|r| {
            let problem = EigenProblem::new(&Tensor::complex(&[n, n], r.clone())?)?;
            Ok(to_real(&power_iteration(&problem, 10_000, 1e-12)?.1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut widths = vec![2 * n * n];
    widths.extend(&config.hidden);
    widths.push(2 * n);
    let stack = Stack::relu_mlp(&widths)?;
    let init = crate::models::init_params(crate::models::Arch::Mlp, stack.specs().to_vec(), base.derive(TAG_INIT));

    // (a) both eigenvector signs as labels for the same input.
    let mut sup = init.values.clone();
    fit_stack(&stack, &mut sup, &inputs, config.epochs, config.learning_rate, |i, out| {
        let v = &targets[i];
        let loss = out.iter().zip(v).map(|(o, t)| (o - t) * (o - t) + (o + t) * (o + t)).sum();
        (loss, out.iter().map(|o| 4.0 * o).collect())
    })?;
    let supervised_norm = inputs
        .iter()
        .map(|x| stack.forward(&sup, x).output().iter().map(|o| o * o).sum::<f64>().sqrt())
        .sum::<f64>()
        / inputs.len() as f64;

    // (b) maximize v̂ᴴRv̂ with v̂ = z / ‖z‖.
    let real_forms: Vec<EigenProblem> = mats
        .iter()
        .map(|r| EigenProblem::new(&Tensor::complex(&[n, n], r.clone())?))
        .collect::<Result<Vec<_>>>()?;
    let mut unsup = init.values.clone();
    fit_stack(&stack, &mut unsup, &inputs, config.epochs, config.learning_rate, |i, out| {
        rayleigh_loss(&real_forms[i], out)
    })?;
    let z = stack.forward(&unsup, &flatten(fixed.matrix())).acts.pop().unwrap_or_default();
    let v = normalized(&to_complex(&z));
    let unsupervised_ratio = fixed.quadratic_form(&v) / lambda_max;
    Ok(EigenSeedResult { seed, supervised_norm, unsupervised_ratio })
}

fn normalized(v: &[Complex64]) -> Vec<Complex64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    v.iter().map(|z| z / norm).collect()
}

/// `−x̂ᴴRx̂` for `x̂ = z / ‖z‖`, with the gradient wrt the real form of `z`.
fn rayleigh_loss(problem: &EigenProblem, z: &[f64]) -> (f64, Vec<f64>) {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let x: Vec<f64> = z.iter().map(|v| v / norm).collect();
    let cx = to_complex(&x);
    let rx = to_real(&problem.apply(&cx));
    let q: f64 = x.iter().zip(&rx).map(|(a, b)| a * b).sum();
    let grad = rx.iter().zip(&x).map(|(r, xi)| -2.0 * (r - q * xi) / norm).collect();
    (-q, grad)
}

/// Trains one MLP per seed under the two-label MSE loss and another under
/// the unsupervised Rayleigh-quotient loss.
pub fn demo_loss_mismatch_eigen(n_dim: usize, seeds: &[u64], config: &EigenDemoConfig) -> Result<EigenDemoReport> {
    if n_dim < 2 {
        return Err(Error::domain("n_dim must be at least 2"));
    }
    if seeds.is_empty() || config.n_train == 0 || config.epochs == 0 {
        return Err(Error::config("need at least one seed, sample, and epoch"));
    }
    let fixed = EigenProblem::new(&Tensor::complex(&[n_dim, n_dim], spiked_diagonal(n_dim))?)?;
    let lambda_max = power_iteration(&fixed, 10_000, 1e-12)?.0;
    let mut per_seed = Vec::new();
    let mut failures = Vec::new();
    for &seed in seeds {
        match eigen_seed(n_dim, seed, config, &fixed, lambda_max) {
            Ok(r) => per_seed.push(r),
            Err(e) => failures.push(alloc::format!("seed {seed}: {e}")),
        }
    }
    let norms: Vec<f64> = per_seed.iter().map(|r| r.supervised_norm).collect();
    let ratios: Vec<f64> = per_seed.iter().map(|r| r.unsupervised_ratio).collect();
    Ok(EigenDemoReport {
        n_dim,
        lambda_max,
        median_supervised_norm: median(&norms).unwrap_or(f64::NAN),
        median_unsupervised_ratio: median(&ratios).unwrap_or(f64::NAN),
        per_seed,
        failures,
    })
}

/// An instance and permutation on which a model is not permutation
/// equivariant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquivarianceWitness {
    pub instance: NetworkInstance,
    pub perm: Vec<usize>,
    /// `model(permuted instance)`.
    pub permuted_output: Vec<f64>,
    /// `permute(model(instance))`.
    pub output_permuted: Vec<f64>,
    pub max_deviation: f64,
}

/// Largest `|model(πx) − π model(x)|` for a cyclic shift `π`.
pub fn equivariance_deviation<M: PowerModel + ?Sized>(model: &M, instance: &NetworkInstance, perm: &[usize]) -> Result<EquivarianceWitness> {
    let permuted_output = model.forward(&instance.permuted(perm)?)?;
    let output_permuted = permute_values(&model.forward(instance)?, perm);
    let max_deviation = permuted_output.iter().zip(&output_permuted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EquivarianceWitness { instance: instance.clone(), perm: perm.to_vec(), permuted_output, output_permuted, max_deviation })
}

/// First of `tries` random instances whose cyclic shift moves some output by
/// more than `tol`.
pub fn find_equivariance_witness<M: PowerModel + ?Sized>(
    model: &M,
    k: usize,
    channel_model: &ChannelModel,
    key: SeedKey,
    tries: usize,
    tol: f64,
) -> Result<Option<EquivarianceWitness>> {
    let perm: Vec<usize> = (0..k).map(|i| (i + 1) % k).collect();
    for t in 0..tries {
        let inst = sample_instance(k, channel_model, instance_key(key, t))?;
        let w = equivariance_deviation(model, &inst, &perm)?;
        if w.max_deviation > tol {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelParams;

    /// Replays stored outputs; stands in for a perfect or a zero model.
    struct Table {
        params: ModelParams,
        outputs: Vec<(NetworkInstance, Vec<f64>)>,
        zero: bool,
    }

    impl Table {
        fn oracle(sets: &[&Dataset]) -> Self {
            let mut outputs = Vec::new();
            for s in sets {
                for (i, l) in s.instances.iter().zip(s.labels.as_ref().unwrap()) {
                    outputs.push((i.clone(), l.clone()));
                }
            }
            Self { params: crate::models::init_params(crate::models::Arch::Mlp, vec![], SeedKey::new(0, 0)), outputs, zero: false }
        }

        fn zero() -> Self {
            Self { zero: true, ..Self::oracle(&[]) }
        }
    }

    impl PowerModel for Table {
        fn params(&self) -> &ModelParams {
            &self.params
        }
        fn params_mut(&mut self) -> &mut ModelParams {
            &mut self.params
        }
        fn forward_with(&self, _: &[f64], inst: &NetworkInstance) -> Result<Vec<f64>> {
            if self.zero {
                return Ok(vec![0.0; inst.k]);
            }
            match self.outputs.iter().find(|(i, _)| i == inst) {
                Some((_, p)) => Ok(p.clone()),
                None => crate::oracles::wmmse(inst, 100, 1e-9).map(|a| a.p),
            }
        }
        fn backward_with(&self, _: &[f64], _: &NetworkInstance, _: &crate::models::LossFn<'_>, _: &mut [f64]) -> Result<f64> {
            Err(Error::config("not trainable"))
        }
    }

    fn sets() -> (Dataset, Dataset) {
        let a = gen_dataset(20, 3, &ChannelModel::RayleighIid, OracleName::Wmmse, SeedKey::new(1, 0)).unwrap();
        let b = gen_dataset(20, 3, &ChannelModel::RayleighIid, OracleName::Wmmse, SeedKey::new(1, 1000)).unwrap();
        (a, b)
    }

    #[test]
    fn oracle_model_has_zero_gaps() {
        let (a, b) = sets();
        let g = measure_gaps(&Table::oracle(&[&a, &b]), &a, &b, OracleName::Wmmse).unwrap();
        assert_eq!((g.train_gap, g.gen_gap, g.total_gap), (0.0, 0.0, 0.0));
        assert_eq!((g.n_train, g.n_test), (20, 20));
    }

    #[test]
    fn zero_power_has_unit_gap() {
        let (a, b) = sets();
        let g = measure_gaps(&Table::zero(), &a, &b, OracleName::Wmmse).unwrap();
        assert_eq!(g.total_gap, 1.0);
        assert!(g.total_gap <= g.train_gap + g.gen_gap + 1e-9);
    }

    #[test]
    fn gap_rejects_bad_sets() {
        let (a, _) = sets();
        let unlabeled = gen_dataset(3, 3, &ChannelModel::RayleighIid, OracleName::None, SeedKey::new(1, 0)).unwrap();
        assert!(measure_gaps(&Table::zero(), &a, &a, OracleName::BruteForce).is_err());
        assert!(measure_gaps(&Table::zero(), &a, &unlabeled, OracleName::Wmmse).is_err());
        let empty = Dataset { instances: vec![], labels: Some(vec![]), meta: a.meta.clone() };
        assert!(matches!(measure_gaps(&Table::zero(), &a, &empty, OracleName::Wmmse), Err(Error::Domain(_))));
    }

    #[test]
    fn gaps_are_invariant_to_user_permutation() {
        let (a, b) = sets();
        let model = GnnModel::new(GnnConfig { hidden_dim: 8, ..GnnConfig::default() }, SeedKey::new(4, 0)).unwrap();
        let perm = [2, 0, 1];
        let permute = |d: &Dataset| Dataset {
            instances: d.instances.iter().map(|i| i.permuted(&perm).unwrap()).collect(),
            labels: d.labels.as_ref().map(|ls| ls.iter().map(|l| permute_values(l, &perm)).collect()),
            meta: d.meta.clone(),
        };
        let g1 = measure_gaps(&model, &a, &b, OracleName::Wmmse).unwrap();
        let g2 = measure_gaps(&model, &permute(&a), &permute(&b), OracleName::Wmmse).unwrap();
        assert!((g1.train_gap - g2.train_gap).abs() < 1e-12);
        assert!((g1.total_gap - g2.total_gap).abs() < 1e-12);
    }

    #[test]
    fn quantile_definition() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(&v, 0.1), 90.0);
        assert_eq!(upper_quantile(&v, 1e-9), 100.0);
        let mut last = f64::INFINITY;
        for d in [0.01, 0.05, 0.1, 0.3, 0.9] {
            let q = upper_quantile(&v, d);
            assert!(q <= last);
            last = q;
        }
    }

    #[test]
    fn pac_for_oracle_is_zero() {
        let est = estimate_pac_epsilon(&Table::oracle(&[]), 3, &ChannelModel::RayleighIid, OracleName::Wmmse, 0.1, 100, SeedKey::new(3, 0)).unwrap();
        assert_eq!(est.epsilon_hat, 0.0);
        let zero = estimate_pac_epsilon(&Table::zero(), 3, &ChannelModel::RayleighIid, OracleName::Wmmse, 1e-9, 100, SeedKey::new(3, 0)).unwrap();
        assert_eq!(zero.epsilon_hat, *zero.differences.last().unwrap());
        assert!(estimate_pac_epsilon(&Table::zero(), 3, &ChannelModel::RayleighIid, OracleName::Wmmse, 0.1, 99, SeedKey::new(3, 0)).is_err());
        assert!(estimate_pac_epsilon(&Table::zero(), 3, &ChannelModel::RayleighIid, OracleName::Wmmse, 1.0, 100, SeedKey::new(3, 0)).is_err());
    }

    #[test]
    fn slopes_and_medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 / x.sqrt()).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[5.0], &[1.0]), None);
        assert_eq!(loglog_slope(&[1.0, 2.0], &[1.0, -1.0]), None);
    }

    fn small_sweep() -> SweepConfig {
        SweepConfig {
            n_test: 20,
            mlp_hidden: vec![8],
            gnn: GnnConfig { hidden_dim: 4, ..GnnConfig::default() },
            train: TrainConfig { epochs: 2, ..TrainConfig::default() },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn singleton_k_sweep() {
        let r = sweep_k(&[3], 20, &small_sweep()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].seeds_used, 3);
        assert!(r.fitted_ratio_exponent.is_none());
        assert_eq!(r.cells.len(), 3);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn singleton_m_sweep_and_nesting() {
        let config = small_sweep();
        let r = sweep_m(&[10], 3, &config).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.fitted_slope.is_none());
        let [train_key, ..] = cell_keys(1, 3);
        let small = gen_dataset(5, 3, &config.channel_model, OracleName::None, train_key).unwrap();
        let large = gen_dataset(10, 3, &config.channel_model, OracleName::None, train_key).unwrap();
        assert_eq!(small.instances[..], large.instances[..5]);
    }

    #[test]
    fn sweep_rejects_bad_configs() {
        let mut c = small_sweep();
        assert!(sweep_k(&[3, 3], 10, &c).is_err());
        assert!(sweep_m(&[20, 10], 3, &c).is_err());
        c.seeds = vec![1, 2];
        assert!(matches!(sweep_k(&[3], 10, &c), Err(Error::Config(_))));
    }

    #[test]
    fn divergent_cell_is_recorded() {
        let mut c = small_sweep();
        c.train.learning_rate = 1e300;
        c.train.optimizer = OptimizerKind::Sgd;
        c.train.scheme = crate::training::Scheme::Unsupervised;
        let r = sweep_k(&[2], 10, &c).unwrap();
        assert!(!r.failures.is_empty());
    }

    #[test]
    fn power_demo_matches_worked_example() {
        let r = demo_loss_mismatch_power();
        let c = &r.candidates;
        assert_eq!(c[0].mse, 0.0);
        assert!((c[0].sum_rate - 2.0 * 101f64.log2()).abs() < 1e-9);
        assert_eq!(c[1].mse, 1.0);
        assert!(c[1].sum_rate.abs() < 1e-6);
        assert_eq!(c[2].mse, 4.0);
        assert!((c[2].sum_rate - (101f64.log2() + 100.9f64.log2())).abs() < 1e-6);
        assert!(r.inversion_holds);
    }

    #[test]
    fn two_label_loss_at_zero() {
        let v = [0.6, 0.8];
        let at = |o: &[f64]| -> f64 { o.iter().zip(&v).map(|(o, t)| (o - t) * (o - t) + (o + t) * (o + t)).sum() };
        assert!((at(&[0.0, 0.0]) - 2.0).abs() < 1e-12);
        assert!(at(&[0.1, -0.2]) > at(&[0.0, 0.0]));
    }

    #[test]
    fn rayleigh_gradient_matches_finite_differences() {
        let n = 3;
        let problem = EigenProblem::new(&Tensor::complex(&[n, n], perturbed_spike(n, 0.5, SeedKey::new(2, 0))).unwrap()).unwrap();
        let z = [0.3, -0.2, 0.5, 0.1, 0.4, -0.7];
        let (_, g) = rayleigh_loss(&problem, &z);
        for j in 0..z.len() {
            let (mut a, mut b) = (z, z);
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let fd = (rayleigh_loss(&problem, &a).0 - rayleigh_loss(&problem, &b).0) / 2e-6;
            assert!((g[j] - fd).abs() < 1e-7, "{j}: {} vs {fd}", g[j]);
        }
    }

    #[test]
    fn eigen_demo_small() {
        let config = EigenDemoConfig { n_train: 8, epochs: 150, ..EigenDemoConfig::default() };
        let r = demo_loss_mismatch_eigen(3, &[1], &config).unwrap();
        assert!((r.lambda_max - 3.0).abs() < 1e-9);
        assert!(r.median_supervised_norm < 0.1, "{r:?}");
        assert!(r.median_unsupervised_ratio > 0.99, "{r:?}");
        assert!(demo_loss_mismatch_eigen(1, &[1], &config).is_err());
    }

    #[test]
    fn mlp_is_not_equivariant_gnn_is() {
        let mlp = MlpModel::new(4, &[16], SeedKey::new(5, 0)).unwrap();
        let w = find_equivariance_witness(&mlp, 4, &ChannelModel::RayleighIid, SeedKey::new(6, 0), 10, 1e-6).unwrap();
        assert!(w.unwrap().max_deviation > 1e-6);
        let gnn = GnnModel::new(GnnConfig { hidden_dim: 8, ..GnnConfig::default() }, SeedKey::new(5, 0)).unwrap();
        assert!(find_equivariance_witness(&gnn, 4, &ChannelModel::RayleighIid, SeedKey::new(6, 0), 10, 0.0).unwrap().is_none());
    }
}
