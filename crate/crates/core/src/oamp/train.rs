//! End-to-end training of the per-layer step sizes.

use alloc::vec;
use alloc::vec::Vec;

use super::{oamp_layer_generic, Dual, MimoInstance, OampParams, OampState, Scalar};
use crate::error::{Error, Result};
use crate::rng::SeedKey;
use crate::training::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OampTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: SeedKey,
    /// Treat `v²` inside `W` as a constant when differentiating.
    pub freeze_w: bool,
}

impl Default for OampTrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 50, learning_rate: 1e-2, seed: SeedKey::new(0, 0), freeze_w: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OampTrainReport {
    pub train_loss: Vec<f64>,
    /// Held-out loss before training, then after each epoch.
    pub valid_loss: Vec<f64>,
    /// Index into `valid_loss` of the returned parameters; 0 is the
    /// initialization.
    pub best_index: usize,
}

fn sample_loss<S: Scalar>(inst: &MimoInstance, gamma: &[S], theta: &[S], freeze_w: bool) -> S {
    let mut state = OampState::<S>::initial(inst.n_tx);
    for t in 0..gamma.len() {
        state = oamp_layer_generic(&state, inst, gamma[t], theta[t], freeze_w);
    }
    state.x.iter().zip(&inst.x_true).fold(S::zero(), |acc, (x, t)| {
        let dr = x.re - S::from_f64(t.re);
        let di = x.im - S::from_f64(t.im);
        acc + dr * dr + di * di
    })
}

/// `‖x_T − x_true‖²` of the soft output.
pub fn oamp_loss(inst: &MimoInstance, params: &OampParams) -> Result<f64> {
    params.validate()?;
    Ok(sample_loss(inst, &params.gamma, &params.theta, false))
}

/// Loss and its gradient with respect to `[γ₁..γ_T, θ₁..θ_T]`, one
/// forward-mode pass per coordinate.
pub fn oamp_gradient(inst: &MimoInstance, params: &OampParams, freeze_w: bool) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    let t = params.layers;
    let mut grad = Vec::with_capacity(2 * t);
    let mut loss = 0.0;
    for coord in 0..2 * t {
        let seed = |v: &[f64], offset: usize| -> Vec<Dual> {
            v.iter().enumerate().map(|(i, &x)| Dual::new(x, if i + offset == coord { 1.0 } else { 0.0 })).collect()
        };
        let out = sample_loss(inst, &seed(&params.gamma, 0), &seed(&params.theta, t), freeze_w);
        loss = out.re;
        grad.push(out.d);
    }
    Ok((loss, grad))
}

fn mean_loss(data: &[MimoInstance], params: &OampParams) -> f64 {
    data.iter().map(|i| sample_loss(i, &params.gamma, &params.theta, false)).sum::<f64>() / data.len() as f64
}

/// Mini-batch Adam on the mean squared symbol error, starting from `init`.
/// Returns the parameters with the lowest held-out loss seen, including the
/// initialization.
pub fn train_oamp(
    train: &[MimoInstance],
    valid: &[MimoInstance],
    init: &OampParams,
    config: &OampTrainConfig,
) -> Result<(OampParams, OampTrainReport)> {
    init.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::domain("empty OAMP training or validation set"));
    }
    if config.epochs == 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::config("epochs, batch_size and learning_rate must be positive"));
    }
    let t = init.layers;
    let mut params = init.clone();
    let mut values: Vec<f64> = params.gamma.iter().chain(&params.theta).copied().collect();
    let mut opt = Optimizer::new(OptimizerKind::AdaptiveMoment, config.learning_rate, 2 * t);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (mean_loss(valid, &params), params.clone(), 0);
    let mut report = OampTrainReport { train_loss: Vec::new(), valid_loss: vec![best.0], best_index: 0 };

    for epoch in 0..config.epochs {
        config.seed.derive(epoch as u64).stream().shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; 2 * t];
            for &i in batch {
                let (l, g) = oamp_gradient(&train[i], &params, config.freeze_w)?;
                total += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            grad.iter_mut().for_each(|g| *g /= batch.len() as f64);
            opt.step(&mut values, &grad);
            params.gamma.copy_from_slice(&values[..t]);
            params.theta.copy_from_slice(&values[t..]);
        }
        let train_loss = total / train.len() as f64;
        let valid_loss = mean_loss(valid, &params);
        if !train_loss.is_finite() || !valid_loss.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch, loss: train_loss });
        }
        report.train_loss.push(train_loss);
        report.valid_loss.push(valid_loss);
        if valid_loss < best.0 {
            best = (valid_loss, params.clone(), epoch + 1);
        }
    }
    report.best_index = best.2;
    Ok((best.1, report))
}

/// `n` independent instances on consecutive streams of `key`.
pub fn gen_mimo_set(n: usize, n_tx: usize, m_rx: usize, snr_db: f64, key: SeedKey) -> Result<Vec<MimoInstance>> {
    (0..n).map(|t| super::trial_instance(n_tx, m_rx, snr_db, key, t)).collect()
}
