//! One function per subcommand. Each takes a resolved config and an output
//! directory, writes its artifacts plus `manifest.json`, and returns a short
//! human-readable summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rrm_core::gapbench::{
    self, assemble_sample_complexity, assemble_scaling, demo_loss_mismatch_eigen, demo_loss_mismatch_power,
    equivariance_deviation, estimate_pac_epsilon, find_equivariance_witness, k_sweep_cells, m_sweep_cells, measure_gaps,
    run_k_cell, run_m_cell, CellOutcome, EigenDemoConfig, SweepConfig,
};
use rrm_core::models::{Arch, GnnConfig, GnnModel, MlpModel, Model, PowerModel, Standardizer};
use rrm_core::netgen::gen_dataset;
use rrm_core::oamp::{
    gen_mimo_set, paired_from_errors, ser_from_errors, train_oamp, trial_errors, Detector, OampParams, OampTrainConfig,
};
use rrm_core::oracles::{hoeffding_bound, hoeffding_coverage, BoundedDist, OracleName};
use rrm_core::training::{train, OptimizerKind, Scheme, TrainConfig};
use rrm_core::{ChannelModel, SeedKey};
use serde::{Deserialize, Serialize};

use crate::artifacts::{load_manifest, OutDir, MANIFEST_NAME};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::dataset_io::{load_dataset, save_dataset};
use crate::error::{LabError, Result};

/// Worker pool for the commands that fan out.
pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LabError::Runtime(format!("thread pool: {e}")))
}

fn channel(name: &str) -> Result<ChannelModel> {
    name.parse().map_err(|e: rrm_core::Error| LabError::config(format!("channel: {e}")))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| LabError::io(path, e))
}

fn finish<T: Serialize>(out: OutDir, command: &str, config: &T, started: Instant) -> Result<()> {
    let value = serde_json::to_value(config).expect("config serializes");
    out.finish(command, value, started.elapsed().as_secs_f64())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub k: usize,
    pub n: usize,
    pub channel: String,
    pub oracle: OracleName,
    pub seed: u64,
    /// File name of the dataset inside the output directory.
    pub out: String,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self { k: 5, n: 100, channel: "rayleigh_iid".into(), oracle: OracleName::Wmmse, seed: 0, out: "dataset.jsonl".into() }
    }
}

pub fn gen_data(cfg: &GenDataConfig, out_dir: &Path) -> Result<String> {
    let started = Instant::now();
    let mut out = OutDir::create(out_dir)?;
    let data = gen_dataset(cfg.n, cfg.k, &channel(&cfg.channel)?, cfg.oracle, SeedKey::new(cfg.seed, 0))?;
    save_dataset(&data, &out.path(&cfg.out))?;
    out.record(&cfg.out);
    finish(out, "gen-data", cfg, started)?;
    Ok(format!("wrote {} instances (k = {}, oracle = {}) to {}", cfg.n, cfg.k, cfg.oracle, out_dir.join(&cfg.out).display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub arch: Arch,
    pub scheme: Scheme,
    pub data: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub early_stop_tol: f64,
    pub mlp_hidden: Vec<usize>,
    pub gnn: GnnConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            arch: Arch::Mpgnn,
            scheme: t.scheme,
            data: PathBuf::new(),
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            seed: 0,
            early_stop_tol: t.early_stop_tol,
            mlp_hidden: vec![128, 128],
            gnn: GnnConfig::default(),
        }
    }
}

pub fn build_model(arch: Arch, k: usize, mlp_hidden: &[usize], gnn: &GnnConfig, key: SeedKey, fit_on: &rrm_core::Dataset) -> Result<Model> {
    Ok(match arch {
        Arch::Mlp => {
            let mut m = MlpModel::new(k, mlp_hidden, key)?;
            m.set_standardizer(Standardizer::fit(&fit_on.instances)?)?;
            Model::Mlp(m)
        }
        Arch::Mpgnn => Model::Gnn(GnnModel::new(gnn.clone(), key)?),
        Arch::Oamp => return Err(LabError::config("arch: use the oamp command for the unrolled detector")),
    })
}

pub fn train_cmd(cfg: &TrainCmdConfig, out_dir: &Path) -> Result<String> {
    let started = Instant::now();
    if cfg.data.as_os_str().is_empty() {
        return Err(LabError::config("data: a dataset path is required"));
    }
    let mut cfg = cfg.clone();
    cfg.data = absolute(&cfg.data)?;
    let data = load_dataset(&cfg.data)?;
    if cfg.scheme == Scheme::Supervised && !data.is_labeled() {
        return Err(LabError::config(format!("scheme: supervised training needs labels, {} is unlabelled", cfg.data.display())));
    }
    let k = data.instances.first().map(|i| i.k).ok_or_else(|| LabError::config("data: empty dataset"))?;
    let base = SeedKey::new(cfg.seed, 0);
    let mut model = build_model(cfg.arch, k, &cfg.mlp_hidden, &cfg.gnn, base.derive(1), &data)?;
    let train_config = TrainConfig {
        scheme: cfg.scheme,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        optimizer: cfg.optimizer,
        seed: base.derive(2),
        early_stop_tol: cfg.early_stop_tol,
    };
    let t0 = Instant::now();
    let (params, mut report) = train(&model, &data, &train_config)?;
    report.wall_time = t0.elapsed().as_secs_f64();
    *model.params_mut() = params;

    let mut out = OutDir::create(out_dir)?;
    out.record_input(&cfg.data);
    save_checkpoint(&model, &out.path("checkpoint.json"))?;
    out.record("checkpoint.json");
    out.write_json("train_report.json", &report)?;
    let last = report.loss_trajectory.last().copied().unwrap_or(f64::NAN);
    finish(out, "train", &cfg, started)?;
    Ok(format!("trained {:?} for {} epochs, final loss {last:.6e}", cfg.arch, report.loss_trajectory.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacSection {
    /// Zero skips the estimate.
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for PacSection {
    fn default() -> Self {
        Self { trials: 0, delta: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalGapConfig {
    pub checkpoint: PathBuf,
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    /// Defaults to the oracle the training set was labelled with.
    pub oracle: Option<OracleName>,
    pub pac: PacSection,
}

impl Default for EvalGapConfig {
    fn default() -> Self {
        Self { checkpoint: PathBuf::new(), train_data: PathBuf::new(), test_data: PathBuf::new(), oracle: None, pac: PacSection::default() }
    }
}

pub fn eval_gap(cfg: &EvalGapConfig, out_dir: &Path) -> Result<String> {
    let started = Instant::now();
    let mut cfg = cfg.clone();
    for (name, p) in [("checkpoint", &mut cfg.checkpoint), ("train_data", &mut cfg.train_data), ("test_data", &mut cfg.test_data)] {
        if p.as_os_str().is_empty() {
            return Err(LabError::config(format!("{name}: a path is required")));
        }
        *p = absolute(p)?;
    }
    let model = load_checkpoint(&cfg.checkpoint)?;
    let train_set = load_dataset(&cfg.train_data)?;
    let test_set = load_dataset(&cfg.test_data)?;
    let oracle = *cfg.oracle.get_or_insert(train_set.meta.oracle);
    let report = measure_gaps(&model, &train_set, &test_set, oracle)?;
    let mut out = OutDir::create(out_dir)?;
    for p in [&cfg.checkpoint, &cfg.train_data, &cfg.test_data] {
        out.record_input(p);
    }
    out.write_json("gap_report.json", &report)?;
    let mut summary = format!(
        "train_gap {:.5}  gen_gap {:.5}  total_gap {:.5}  (oracle {})",
        report.train_gap, report.gen_gap, report.total_gap, oracle
    );
    if cfg.pac.trials > 0 {
        let k = test_set.instances[0].k;
        let pac = estimate_pac_epsilon(
            &model,
            k,
            &train_set.meta.channel_model,
            oracle,
            cfg.pac.delta,
            cfg.pac.trials,
            SeedKey::new(cfg.pac.seed, 0),
        )?;
        summary.push_str(&format!("\nPAC epsilon_hat {:.5} at delta {}", pac.epsilon_hat, pac.delta));
        out.write_json("pac_estimate.json", &pac)?;
    }
    finish(out, "eval-gap", &cfg, started)?;
    Ok(summary)
}

/// Model and training settings shared by both sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: usize,
    pub n_test: usize,
    pub channel: String,
    pub oracle: OracleName,
    pub mlp_hidden: Vec<usize>,
    pub gnn: GnnConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            seeds: s.seeds.len(),
            n_test: s.n_test,
            channel: "rayleigh_iid".into(),
            oracle: s.oracle,
            mlp_hidden: s.mlp_hidden,
            gnn: s.gnn,
            epochs: s.train.epochs,
            batch_size: s.train.batch_size,
            learning_rate: s.train.learning_rate,
            optimizer: s.train.optimizer,
        }
    }
}

impl SweepSection {
    pub fn to_core(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            seeds: (1..=self.seeds as u64).collect(),
            n_test: self.n_test,
            channel_model: channel(&self.channel)?,
            oracle: self.oracle,
            mlp_hidden: self.mlp_hidden.clone(),
            gnn: self.gnn.clone(),
            train: TrainConfig {
                scheme: Scheme::Supervised,
                epochs: self.epochs,
                batch_size: self.batch_size,
                learning_rate: self.learning_rate,
                optimizer: self.optimizer,
                seed: SeedKey::new(0, 0),
                early_stop_tol: 0.0,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepKConfig {
    pub ks: Vec<usize>,
    pub m: usize,
    #[serde(flatten)]
    pub sweep: SweepSection,
}

impl Default for SweepKConfig {
    fn default() -> Self {
        Self { ks: vec![5, 10, 15], m: 2000, sweep: SweepSection::default() }
    }
}

#[derive(Serialize)]
struct KRow {
    k: usize,
    seed: u64,
    arch: &'static str,
    train_gap: f64,
    gen_gap: f64,
    total_gap: f64,
}

pub fn sweep_k(cfg: &SweepKConfig, out_dir: &Path, jobs: usize) -> Result<gapbench::ScalingReport> {
    let started = Instant::now();
    let core = cfg.sweep.to_core()?;
    let cells = k_sweep_cells(&cfg.ks, &core)?;
    let results = pool(jobs)?.install(|| {
        cells.par_iter().map(|&(k, seed)| run_k_cell(k, seed, cfg.m, &core)).collect::<rrm_core::Result<Vec<_>>>()
    })?;
    let report = assemble_scaling(&cfg.ks, cfg.m, &core, results);
    let mut rows = Vec::new();
    for cell in &report.cells {
        for (arch, outcome) in [("mlp", &cell.mlp), ("mpgnn", &cell.gnn)] {
            if let CellOutcome::Done(g) = outcome {
                rows.push(KRow { k: cell.k, seed: cell.seed, arch, train_gap: g.train_gap, gen_gap: g.gen_gap, total_gap: g.total_gap });
            }
        }
    }
    let mut out = OutDir::create(out_dir)?;
    out.write_csv("sweep_k.csv", &rows, &["k", "seed", "arch", "train_gap", "gen_gap", "total_gap"])?;
    out.write_json("sweep_k.json", &report)?;
    finish(out, "sweep-k", cfg, started)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepMConfig {
    pub ms: Vec<usize>,
    pub k: usize,
    #[serde(flatten)]
    pub sweep: SweepSection,
}

impl Default for SweepMConfig {
    fn default() -> Self {
        Self { ms: vec![100, 200, 400, 800, 1600, 3200], k: 5, sweep: SweepSection::default() }
    }
}

#[derive(Serialize)]
struct MRow {
    m: usize,
    seed: u64,
    gen_gap: f64,
}

pub fn sweep_m(cfg: &SweepMConfig, out_dir: &Path, jobs: usize) -> Result<gapbench::SampleComplexityReport> {
    let started = Instant::now();
    let core = cfg.sweep.to_core()?;
    let cells = m_sweep_cells(&cfg.ms, &core)?;
    let results = pool(jobs)?.install(|| {
        cells.par_iter().map(|&(m, seed)| run_m_cell(m, cfg.k, seed, &core)).collect::<rrm_core::Result<Vec<_>>>()
    })?;
    let report = assemble_sample_complexity(&cfg.ms, cfg.k, results);
    let rows: Vec<MRow> = report
        .cells
        .iter()
        .filter_map(|c| c.outcome.report().map(|g| MRow { m: c.m, seed: c.seed, gen_gap: g.gen_gap }))
        .collect();
    let mut out = OutDir::create(out_dir)?;
    out.write_csv("sweep_m.csv", &rows, &["m", "seed", "gen_gap"])?;
    out.write_json("sweep_m.json", &report)?;
    finish(out, "sweep-m", cfg, started)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Demo {
    All,
    Power,
    Eigen,
    Hoeffding,
    Equivariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSection {
    pub n_dim: usize,
    pub seeds: usize,
    #[serde(flatten)]
    pub train: EigenDemoConfig,
}

impl Default for EigenSection {
    fn default() -> Self {
        Self { n_dim: 8, seeds: 5, train: EigenDemoConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoeffdingSection {
    pub dist: BoundedDist,
    pub m: usize,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for HoeffdingSection {
    fn default() -> Self {
        Self { dist: BoundedDist::Bernoulli { p: 0.5 }, m: 1000, delta: 0.05, trials: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivarianceSection {
    pub k: usize,
    /// Random (instance, permutation) pairs checked on the GNN.
    pub pairs: usize,
    pub mlp_hidden: Vec<usize>,
    pub gnn: GnnConfig,
    pub seed: u64,
}

impl Default for EquivarianceSection {
    fn default() -> Self {
        Self { k: 5, pairs: 100, mlp_hidden: vec![64], gnn: GnnConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemosConfig {
    pub which: Demo,
    pub eigen: EigenSection,
    pub hoeffding: HoeffdingSection,
    pub equivariance: EquivarianceSection,
}

impl Default for DemosConfig {
    fn default() -> Self {
        Self {
            which: Demo::All,
            eigen: EigenSection::default(),
            hoeffding: HoeffdingSection::default(),
            equivariance: EquivarianceSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingReport {
    pub dist: BoundedDist,
    pub m: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub coverage: f64,
}

pub fn hoeffding_demo(s: &HoeffdingSection) -> Result<HoeffdingReport> {
    let width = match s.dist {
        BoundedDist::Constant { .. } => 0.0,
        BoundedDist::Bernoulli { .. } => 1.0,
        BoundedDist::Uniform { lo, hi } => hi - lo,
        BoundedDist::Normal { .. } => return Err(LabError::config("hoeffding.dist: the bound needs a bounded distribution")),
    };
    let epsilon = hoeffding_bound(s.m, width, s.delta)?.epsilon;
    let coverage = hoeffding_coverage(&s.dist, s.m, s.delta, s.trials, SeedKey::new(s.seed, 0))?;
    Ok(HoeffdingReport { dist: s.dist, m: s.m, delta: s.delta, epsilon, trials: s.trials, coverage })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub k: usize,
    pub mlp_witness: Option<gapbench::EquivarianceWitness>,
    pub gnn_pairs_checked: usize,
    /// Largest `|gnn(πx) − π gnn(x)|` over the checked pairs.
    pub gnn_max_deviation: f64,
}

pub fn equivariance_demo(s: &EquivarianceSection) -> Result<EquivarianceReport> {
    let base = SeedKey::new(s.seed, 0);
    let mlp = MlpModel::new(s.k, &s.mlp_hidden, base.derive(1))?;
    let mlp_witness = find_equivariance_witness(&mlp, s.k, &ChannelModel::RayleighIid, base.derive(2), 100, 1e-9)?;
    let gnn = GnnModel::new(s.gnn.clone(), base.derive(3))?;
    let mut worst = 0.0f64;
    for t in 0..s.pairs {
        let key = rrm_core::netgen::instance_key(base.derive(4), t);
        let inst = rrm_core::netgen::sample_instance(s.k, &ChannelModel::RayleighIid, key)?;
        let mut perm: Vec<usize> = (0..s.k).collect();
        key.derive(5).stream().shuffle(&mut perm);
        worst = worst.max(equivariance_deviation(&gnn, &inst, &perm)?.max_deviation);
    }
    Ok(EquivarianceReport { k: s.k, mlp_witness, gnn_pairs_checked: s.pairs, gnn_max_deviation: worst })
}

pub fn demos(cfg: &DemosConfig, out_dir: &Path) -> Result<String> {
    let started = Instant::now();
    let mut out = OutDir::create(out_dir)?;
    let mut lines = Vec::new();
    let all = cfg.which == Demo::All;
    if all || cfg.which == Demo::Power {
        let r = demo_loss_mismatch_power();
        for c in &r.candidates {
            lines.push(format!("power: p = {:?}  mse = {}  sum_rate = {:.6}", c.p, c.mse, c.sum_rate));
        }
        lines.push(format!("power: inversion holds = {}", r.inversion_holds));
        out.write_json("demo_power.json", &r)?;
    }
    if all || cfg.which == Demo::Eigen {
        let seeds: Vec<u64> = (1..=cfg.eigen.seeds as u64).collect();
        let r = demo_loss_mismatch_eigen(cfg.eigen.n_dim, &seeds, &cfg.eigen.train)?;
        lines.push(format!(
            "eigen: median supervised output norm {:.4}, median unsupervised quotient ratio {:.5}",
            r.median_supervised_norm, r.median_unsupervised_ratio
        ));
        out.write_json("demo_eigen.json", &r)?;
    }
    if all || cfg.which == Demo::Hoeffding {
        let r = hoeffding_demo(&cfg.hoeffding)?;
        lines.push(format!("hoeffding: epsilon {:.5}, coverage {:.4} (target {:.2})", r.epsilon, r.coverage, 1.0 - r.delta));
        out.write_json("demo_hoeffding.json", &r)?;
    }
    if all || cfg.which == Demo::Equivariance {
        let r = equivariance_demo(&cfg.equivariance)?;
        lines.push(format!(
            "equivariance: mlp witness deviation {:?}, gnn max deviation {} over {} pairs",
            r.mlp_witness.as_ref().map(|w| w.max_deviation),
            r.gnn_max_deviation,
            r.gnn_pairs_checked
        ));
        out.write_json("demo_equivariance.json", &r)?;
    }
    finish(out, "demos", cfg, started)?;
    Ok(lines.join("\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OampCmdConfig {
    pub ntx: usize,
    pub mrx: usize,
    pub snr: Vec<f64>,
    pub layers: usize,
    /// Learn (γ, θ) and compare against the fixed γ = θ = 1.
    pub train: bool,
    /// SNR of the training data; defaults to the first evaluation SNR.
    pub train_snr: Option<f64>,
    pub n_train: usize,
    pub n_valid: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub freeze_w: bool,
    pub trials: usize,
    /// Also run exhaustive ML (feasible for ntx <= 8).
    pub ml: bool,
    pub seed: u64,
}

impl Default for OampCmdConfig {
    fn default() -> Self {
        Self {
            ntx: 4,
            mrx: 4,
            snr: vec![10.0],
            layers: 4,
            train: false,
            train_snr: None,
            n_train: 2000,
            n_valid: 500,
            epochs: 20,
            batch_size: 50,
            learning_rate: 1e-2,
            freeze_w: false,
            trials: 25_000,
            ml: false,
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct SerRow {
    snr_db: f64,
    detector: String,
    ser: f64,
    ci_half_width: f64,
    trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OampComparison {
    pub snr_db: f64,
    pub learned_vs_fixed: rrm_core::oamp::PairedSer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OampReport {
    pub fixed: OampParams,
    pub learned: Option<OampParams>,
    pub training: Option<rrm_core::oamp::OampTrainReport>,
    pub comparisons: Vec<OampComparison>,
}

pub fn errors_per_trial(detector: &Detector, cfg: &OampCmdConfig, snr_db: f64, key: SeedKey) -> Result<Vec<usize>> {
    (0..cfg.trials)
        .map(|t| trial_errors(detector, cfg.ntx, cfg.mrx, snr_db, key, t).map_err(|e| LabError::Core(e.at_index(t))))
        .collect()
}

pub fn eval_key(seed: u64, snr_db: f64) -> SeedKey {
    SeedKey::new(seed, 0).derive(snr_db.to_bits())
}

pub fn oamp_cmd(cfg: &OampCmdConfig, out_dir: &Path) -> Result<OampReport> {
    let started = Instant::now();
    if cfg.snr.is_empty() {
        return Err(LabError::config("snr: at least one value is required"));
    }
    if cfg.trials < 1000 {
        return Err(LabError::config("trials: at least 1000 are required"));
    }
    let fixed = OampParams::fixed(cfg.layers);
    fixed.validate()?;
    let base = SeedKey::new(cfg.seed, 0);
    let (learned, training) = if cfg.train {
        let snr = cfg.train_snr.unwrap_or(cfg.snr[0]);
        let train_set = gen_mimo_set(cfg.n_train, cfg.ntx, cfg.mrx, snr, base.derive(1))?;
        let valid_set = gen_mimo_set(cfg.n_valid, cfg.ntx, cfg.mrx, snr, base.derive(2))?;
        let tc = OampTrainConfig {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            seed: base.derive(3),
            freeze_w: cfg.freeze_w,
        };
        let (p, r) = train_oamp(&train_set, &valid_set, &fixed, &tc)?;
        (Some(p), Some(r))
    } else {
        (None, None)
    };

    let mut detectors: Vec<(String, Detector)> = vec![
        ("lmmse".into(), Detector::Lmmse),
        ("oamp_fixed".into(), Detector::Oamp { params: fixed.clone() }),
    ];
    if let Some(p) = &learned {
        detectors.push(("oamp_learned".into(), Detector::Oamp { params: p.clone() }));
    }
    if cfg.ml {
        detectors.push(("ml".into(), Detector::Ml));
    }

    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for &snr in &cfg.snr {
        let key = eval_key(cfg.seed, snr);
        let mut per = Vec::new();
        for (name, det) in &detectors {
            let errs = errors_per_trial(det, cfg, snr, key)?;
            let r = ser_from_errors(errs.iter().sum(), cfg.trials, cfg.ntx);
            rows.push(SerRow { snr_db: snr, detector: name.clone(), ser: r.ser, ci_half_width: r.ci_half_width, trials: cfg.trials });
            per.push((name.clone(), errs));
        }
        let find = |n: &str| per.iter().find(|(name, _)| name == n).map(|(_, e)| e);
        if let (Some(l), Some(f)) = (find("oamp_learned"), find("oamp_fixed")) {
            comparisons.push(OampComparison { snr_db: snr, learned_vs_fixed: paired_from_errors(l, f, cfg.ntx) });
        }
    }
    let report = OampReport { fixed, learned, training, comparisons };
    let mut out = OutDir::create(out_dir)?;
    out.write_csv("ser.csv", &rows, &["snr_db", "detector", "ser", "ci_half_width", "trials"])?;
    out.write_json("oamp.json", &report)?;
    finish(out, "oamp", cfg, started)?;
    Ok(report)
}

/// Result of re-running a manifest into a fresh directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub command: String,
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

fn from_config<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| LabError::config(format!("manifest config: {e}")))
}

/// Re-runs the command recorded in `manifest_path` into `out_dir` and
/// compares artifact checksums.
pub fn replay(manifest_path: &Path, out_dir: &Path, jobs: usize) -> Result<ReplayReport> {
    let path = if manifest_path.is_dir() { manifest_path.join(MANIFEST_NAME) } else { manifest_path.to_path_buf() };
    let manifest = load_manifest(&path)?;
    let c = &manifest.config;
    match manifest.command.as_str() {
        "gen-data" => gen_data(&from_config(c)?, out_dir).map(drop)?,
        "train" => train_cmd(&from_config(c)?, out_dir).map(drop)?,
        "eval-gap" => eval_gap(&from_config(c)?, out_dir).map(drop)?,
        "sweep-k" => sweep_k(&from_config(c)?, out_dir, jobs).map(drop)?,
        "sweep-m" => sweep_m(&from_config(c)?, out_dir, jobs).map(drop)?,
        "demos" => demos(&from_config(c)?, out_dir).map(drop)?,
        "oamp" => oamp_cmd(&from_config(c)?, out_dir).map(drop)?,
        other => return Err(LabError::config(format!("manifest names unknown command `{other}`"))),
    }
    let fresh = load_manifest(&out_dir.join(MANIFEST_NAME))?;
    let mut report = ReplayReport { command: manifest.command.clone(), matched: vec![], mismatched: vec![] };
    for (name, sum) in &manifest.artifacts {
        if fresh.artifacts.get(name) == Some(sum) {
            report.matched.push(name.clone());
        } else {
            report.mismatched.push(name.clone());
        }
    }
    Ok(report)
}
