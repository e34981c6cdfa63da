//! Loss functions, mini-batch training, and the empirical decay-rate fit
//! used to watch the training gap shrink.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::models::{PowerModel, ModelParams};
use crate::netgen::{Dataset, NetworkInstance};
use crate::oracles::{sum_rate, sum_rate_gradient};
use crate::rng::SeedKey;
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    /// Squared error against oracle labels.
    Supervised,
    /// Negative sum rate of the model's own output.
    Unsupervised,
}

impl core::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Scheme::Supervised),
            "unsupervised" => Ok(Scheme::Unsupervised),
            other => Err(Error::config(alloc::format!(
                "unknown scheme `{other}` (expected supervised, unsupervised)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptimizerKind {
    Sgd,
    AdaptiveMoment,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub scheme: Scheme,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: SeedKey,
    /// Stop once the epoch loss improves by less than this; `0` disables.
    pub early_stop_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Supervised,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::AdaptiveMoment,
            seed: SeedKey::new(0, 0),
            early_stop_tol: 0.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.early_stop_tol >= 0.0) {
            return Err(Error::config("early_stop_tol must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    /// Mean per-sample training loss of each epoch.
    pub loss_trajectory: Vec<f64>,
    /// Slope of `ln(loss)` against epoch, when it can be fitted.
    pub fitted_decay_rate: Option<f64>,
    /// Mean of `model rate / label rate` over the training set, when labelled.
    pub final_train_metric: Option<f64>,
    /// Seconds; filled in by callers that own a clock.
    pub wall_time: f64,
}

/// Sum of squared errors, the convention under which `[1,1,1,0,0]` is at
/// distance 1 from `[1,1,0,0,0]`.
pub fn loss_supervised(p_hat: &[f64], p_label: &[f64]) -> Result<f64> {
    Ok(loss_supervised_grad(p_hat, p_label)?.0)
}

pub fn loss_supervised_grad(p_hat: &[f64], p_label: &[f64]) -> Result<(f64, Vec<f64>)> {
    if p_hat.len() != p_label.len() {
        return Err(Error::dim("label", p_hat.len(), p_label.len()));
    }
    let value = p_hat.iter().zip(p_label).map(|(a, b)| (a - b) * (a - b)).sum();
    let grad = p_hat.iter().zip(p_label).map(|(a, b)| 2.0 * (a - b)).collect();
    Ok((value, grad))
}

/// Negative sum rate.
pub fn loss_unsupervised(p_hat: &[f64], instance: &NetworkInstance) -> Result<f64> {
    Ok(-sum_rate(instance, p_hat)?)
}

pub fn loss_unsupervised_grad(p_hat: &[f64], instance: &NetworkInstance) -> Result<(f64, Vec<f64>)> {
    let value = -sum_rate(instance, p_hat)?;
    let grad = sum_rate_gradient(instance, p_hat)?.into_iter().map(|g| -g).collect();
    Ok((value, grad))
}

/// First-order optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        Self { kind, lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, values: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (x, g) in values.iter_mut().zip(grad) {
                    *x -= self.lr * g;
                }
            }
            OptimizerKind::AdaptiveMoment => {
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for i in 0..values.len() {
                    let g = grad[i];
                    self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
                    self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    values[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
                }
            }
        }
    }
}

/// Loss and gradient of one sample under `scheme`.
pub fn sample_loss_grad<M: PowerModel + ?Sized>(
    model: &M,
    values: &[f64],
    instance: &NetworkInstance,
    label: Option<&[f64]>,
    scheme: Scheme,
    grad: &mut [f64],
) -> Result<f64> {
    match scheme {
        Scheme::Supervised => {
            let label = label.ok_or_else(|| Error::config("supervised training requires labels"))?;
            model.backward_with(values, instance, &|p: &[f64]| loss_supervised_grad(p, label), grad)
        }
        Scheme::Unsupervised => {
            model.backward_with(values, instance, &|p: &[f64]| loss_unsupervised_grad(p, instance), grad)
        }
    }
}

const DIVERGENCE_LOSS: f64 = 1e6;

/// Mini-batch training. Returns the trained parameters; `model` itself is
/// left untouched.
///
/// Sample order in epoch `e` is a shuffle drawn from `config.seed.derive(e)`;
/// batch gradients are means accumulated in that order.
pub fn train<M: PowerModel + ?Sized>(model: &M, dataset: &Dataset, config: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::domain("empty training set"));
    }
    if config.scheme == Scheme::Supervised && !dataset.is_labeled() {
        return Err(Error::config("supervised training requires a labelled dataset"));
    }
    let labels = dataset.labels.as_deref();
    let mut params = model.params().clone();
    let n_params = params.values.len();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, n_params);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trajectory = Vec::with_capacity(config.epochs);
    let mut batch_grad = vec![0.0; n_params];
    let mut sample_grad = vec![0.0; n_params];

    for epoch in 0..config.epochs {
        config.seed.derive(epoch as u64).stream().shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            batch_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                sample_grad.iter_mut().for_each(|g| *g = 0.0);
                let label = labels.map(|l| l[i].as_slice());
                let loss = sample_loss_grad(model, &params.values, &dataset.instances[i], label, config.scheme, &mut sample_grad)?;
                epoch_loss += loss;
                for (b, s) in batch_grad.iter_mut().zip(&sample_grad) {
                    *b += s;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            batch_grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(&mut params.values, &batch_grad);
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        if !mean_loss.is_finite() || mean_loss.abs() > DIVERGENCE_LOSS || params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch, loss: mean_loss });
        }
        let improvement = trajectory.last().map(|prev: &f64| prev - mean_loss);
        trajectory.push(mean_loss);
        if config.early_stop_tol > 0.0 && improvement.is_some_and(|d| d.abs() < config.early_stop_tol) {
            break;
        }
    }

    let fitted_decay_rate = if trajectory.len() >= 10 && trajectory.iter().all(|&l| l > 0.0) {
        fit_decay_rate(&trajectory).ok()
    } else {
        None
    };
    let final_train_metric = match labels {
        Some(labels) => Some(rate_ratio(model, &params.values, &dataset.instances, labels)?),
        None => None,
    };
    let report = TrainReport { loss_trajectory: trajectory, fitted_decay_rate, final_train_metric, wall_time: 0.0 };
    Ok((params, report))
}

/// Mean of `sum_rate(model) / sum_rate(label)` over instances whose label
/// rate is positive.
pub fn rate_ratio<M: PowerModel + ?Sized>(
    model: &M,
    values: &[f64],
    instances: &[NetworkInstance],
    labels: &[Vec<f64>],
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (inst, label) in instances.iter().zip(labels) {
        let reference = sum_rate(inst, label)?;
        if reference > 0.0 {
            total += sum_rate(inst, &model.forward_with(values, inst)?)? / reference;
            count += 1;
        }
    }
    Ok(if count == 0 { 1.0 } else { total / count as f64 })
}

/// Least-squares slope of `ln(loss)` against epoch over the first 80% of
/// the trajectory. Losses are floored at `1e-12` before the log.
pub fn fit_decay_rate(loss_trajectory: &[f64]) -> Result<f64> {
    if loss_trajectory.len() < 10 {
        return Err(Error::domain("need at least 10 epochs to fit a decay rate"));
    }
    if let Some(l) = loss_trajectory.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::domain(alloc::format!("nonpositive loss {l}")));
    }
    let n = loss_trajectory.len() * 4 / 5;
    let ys: Vec<f64> = loss_trajectory[..n].iter().map(|l| l.max(1e-12).ln()).collect();
    let t_mean = (n - 1) as f64 / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ys.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GnnConfig, GnnModel, MlpModel, Standardizer};
    use crate::netgen::{gen_dataset, ChannelModel};
    use crate::oracles::{extreme_instance, OracleName};

    #[test]
    fn supervised_loss_values() {
        assert_eq!(loss_supervised(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        let label = [1.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(loss_supervised(&[1.0, 1.0, 1.0, 0.0, 0.0], &label).unwrap(), 1.0);
        assert_eq!(loss_supervised(&[0.0, 0.0, 0.0, 1.0, 1.0], &label).unwrap(), 4.0);
        assert!(loss_supervised(&[1.0], &label).is_err());
    }

    #[test]
    fn unsupervised_loss_values() {
        let inst = NetworkInstance::new(1, vec![1.0], 1.0, 1.0).unwrap();
        assert_eq!(loss_unsupervised(&[1.0], &inst).unwrap(), -1.0);
        assert_eq!(loss_unsupervised(&[0.0; 5], &extreme_instance()).unwrap(), 0.0);
        assert!(loss_unsupervised(&[2.0], &inst).is_err());
    }

    #[test]
    fn unsupervised_gradient_matches_finite_differences() {
        let inst = crate::netgen::sample_instance(4, &ChannelModel::RayleighIid, SeedKey::new(3, 3)).unwrap();
        let p = [0.2, 0.7, 0.5, 0.35];
        let (_, g) = loss_unsupervised_grad(&p, &inst).unwrap();
        let h = 1e-6;
        for j in 0..4 {
            let (mut a, mut b) = (p, p);
            a[j] += h;
            b[j] -= h;
            let fd = (loss_unsupervised(&a, &inst).unwrap() - loss_unsupervised(&b, &inst).unwrap()) / (2.0 * h);
            assert!((g[j] - fd).abs() / fd.abs() < 1e-6);
        }
    }

    #[test]
    fn decay_rate_of_exact_exponential() {
        let traj: Vec<f64> = (0..50).map(|t| (-0.1 * t as f64).exp()).collect();
        assert!((fit_decay_rate(&traj).unwrap() + 0.1).abs() < 1e-9);
        assert_eq!(fit_decay_rate(&[2.0; 20]).unwrap(), 0.0);
        assert!(fit_decay_rate(&[1.0; 9]).is_err());
        let mut bad = vec![1.0; 12];
        bad[3] = 0.0;
        assert!(matches!(fit_decay_rate(&bad), Err(Error::Domain(_))));
    }

    fn tiny_data(n: usize, oracle: OracleName) -> Dataset {
        gen_dataset(n, 3, &ChannelModel::RayleighIid, oracle, SeedKey::new(21, 0)).unwrap()
    }

    #[test]
    fn epoch_contract() {
        let data = tiny_data(4, OracleName::Wmmse);
        let model = MlpModel::new(3, &[8], SeedKey::new(0, 0)).unwrap();
        let zero = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(train(&model, &data, &zero), Err(Error::Config(_))));
        let one = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let (_, report) = train(&model, &data, &one).unwrap();
        assert_eq!(report.loss_trajectory.len(), 1);
        assert!(report.fitted_decay_rate.is_none());
    }

    #[test]
    fn supervised_needs_labels() {
        let data = tiny_data(4, OracleName::None);
        let model = MlpModel::new(3, &[8], SeedKey::new(0, 0)).unwrap();
        assert!(matches!(train(&model, &data, &TrainConfig::default()), Err(Error::Config(_))));
        let unsup = TrainConfig { scheme: Scheme::Unsupervised, epochs: 3, ..TrainConfig::default() };
        let (_, report) = train(&model, &data, &unsup).unwrap();
        assert!(report.final_train_metric.is_none());
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny_data(20, OracleName::Wmmse);
        let model = GnnModel::new(GnnConfig { hidden_dim: 8, ..GnnConfig::default() }, SeedKey::new(1, 0)).unwrap();
        let config = TrainConfig { epochs: 5, batch_size: 4, seed: SeedKey::new(9, 9), ..TrainConfig::default() };
        let (pa, ra) = train(&model, &data, &config).unwrap();
        let (pb, rb) = train(&model, &data, &config).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ra, rb);
    }

    #[test]
    fn unsupervised_training_improves_rate() {
        let data = tiny_data(30, OracleName::Wmmse);
        let model = GnnModel::new(GnnConfig { hidden_dim: 8, ..GnnConfig::default() }, SeedKey::new(2, 0)).unwrap();
        let config = TrainConfig {
            scheme: Scheme::Unsupervised,
            epochs: 30,
            batch_size: 10,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let before = rate_ratio(&model, &model.params().values, &data.instances, data.labels.as_ref().unwrap()).unwrap();
        let (params, report) = train(&model, &data, &config).unwrap();
        let after = report.final_train_metric.unwrap();
        assert!(after > before, "{before} -> {after}");
        assert_eq!(params.values.len(), model.params().values.len());
    }

    #[test]
    fn divergence_is_reported() {
        let data = tiny_data(4, OracleName::Wmmse);
        let mut model = MlpModel::new(3, &[4], SeedKey::new(0, 0)).unwrap();
        model.set_standardizer(Standardizer::identity(9)).unwrap();
        model.params_mut().values[0] = f64::NAN;
        let err = train(&model, &data, &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 0, .. }));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]

        #[test]
        fn small_sgd_step_does_not_increase_sample_loss(seed in 0u64..1_000_000, supervised in proptest::bool::ANY) {
            let data = gen_dataset(1, 3, &ChannelModel::RayleighIid, OracleName::Wmmse, SeedKey::new(seed, 0)).unwrap();
            let model = MlpModel::new(3, &[6], SeedKey::new(seed, 1)).unwrap();
            let scheme = if supervised { Scheme::Supervised } else { Scheme::Unsupervised };
            let label = data.labels.as_ref().map(|l| l[0].as_slice());
            let loss_at = |v: &[f64]| {
                let mut g = vec![0.0; v.len()];
                let loss = sample_loss_grad(&model, v, &data.instances[0], label, scheme, &mut g).unwrap();
                (loss, g)
            };
            let mut values = model.params().values.clone();
            let (before, grad) = loss_at(&values);
            Optimizer::new(OptimizerKind::Sgd, 1e-4, values.len()).step(&mut values, &grad);
            let (after, _) = loss_at(&values);
            proptest::prop_assert!(after <= before + 1e-8, "{before} -> {after}");
        }
    }
}
