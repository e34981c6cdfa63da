//! Unrolled orthogonal AMP for MIMO detection with QPSK symbols, plus the
//! classical detectors it is benchmarked against.
//!
//! Each layer computes
//!
//! ```text
//! v²  = max((‖y − Hx‖² − Mσ²) / Tr(HᴴH), 1e-12)
//! W   = N · Ŵ / Tr(ŴH),   Ŵ = v²Hᴴ(v²HHᴴ + σ²I)⁻¹
//! r   = x + γ W (y − Hx)
//! C   = I − θ W H
//! τ²  = max((Tr(CCᴴ) v² + θ² σ² Tr(WWᴴ)) / N, 1e-12)
//! x'  = E[x | r, τ²]
//! ```
//!
//! where `τ²` is the per-entry complex noise variance seen by the denoiser.

mod scalar;
mod train;

pub use scalar::{Dual, Scalar};
pub use train::{gen_mimo_set, oamp_gradient, oamp_loss, train_oamp, OampTrainConfig, OampTrainReport};

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::rng::{SeedKey, Stream};

pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const RIDGE: f64 = 1e-12;
/// Largest transmit dimension the exhaustive ML detector accepts (4^8 hypotheses).
pub const ML_MAX_TX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Constellation {
    /// `(±1 ± i)/√2`
    #[default]
    Qpsk,
}

impl Constellation {
    pub fn points(self) -> [Complex64; 4] {
        let a = FRAC_1_SQRT_2;
        [Complex64::new(a, a), Complex64::new(-a, a), Complex64::new(-a, -a), Complex64::new(a, -a)]
    }

    pub fn contains(self, x: Complex64) -> bool {
        self.points().iter().any(|p| (p - x).norm() < 1e-12)
    }

    /// Nearest constellation point; ties at zero go to the positive side.
    pub fn hard_decision(self, x: Complex64) -> Complex64 {
        let s = |v: f64| if v < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
        Complex64::new(s(x.re), s(x.im))
    }

    pub fn sample(self, stream: &mut Stream) -> Complex64 {
        self.points()[stream.below(4)]
    }
}

/// `y = Hx + n` with `H` stored row-major, `m_rx × n_tx`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MimoInstance {
    pub m_rx: usize,
    pub n_tx: usize,
    pub h: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sigma2: f64,
    pub x_true: Vec<Complex64>,
}

impl MimoInstance {
    pub fn new(m_rx: usize, n_tx: usize, h: Vec<Complex64>, y: Vec<Complex64>, sigma2: f64, x_true: Vec<Complex64>) -> Result<Self> {
        if m_rx == 0 || n_tx == 0 {
            return Err(Error::domain("antenna counts must be positive"));
        }
        if h.len() != m_rx * n_tx {
            return Err(Error::dim("channel matrix", m_rx * n_tx, h.len()));
        }
        if y.len() != m_rx {
            return Err(Error::dim("received vector", m_rx, y.len()));
        }
        if x_true.len() != n_tx {
            return Err(Error::dim("transmitted vector", n_tx, x_true.len()));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::domain("sigma2 must be finite and nonnegative"));
        }
        if x_true.iter().any(|&x| !Constellation::Qpsk.contains(x)) {
            return Err(Error::domain("transmitted symbol outside the constellation"));
        }
        Ok(Self { m_rx, n_tx, h, y, sigma2, x_true })
    }

    /// Same instance with transmit antennas reordered: new column `a` is old
    /// column `perm[a]`.
    pub fn permuted_columns(&self, perm: &[usize]) -> Self {
        let n = self.n_tx;
        let h = (0..self.m_rx).flat_map(|i| perm.iter().map(move |&j| (i, j))).map(|(i, j)| self.h[i * n + j]).collect();
        let x_true = perm.iter().map(|&j| self.x_true[j]).collect();
        Self { h, x_true, ..self.clone() }
    }
}

/// Noise variance for a per-receive-antenna SNR with unit-variance channel
/// taps and unit-energy symbols: `σ² = N / 10^(snr_db/10)`.
pub fn noise_variance(n_tx: usize, snr_db: f64) -> f64 {
    n_tx as f64 / num_traits::Float::powf(10f64, snr_db / 10.0)
}

/// Rayleigh channel (`CN(0,1)` taps), uniform QPSK symbols, AWGN.
pub fn sample_mimo(n_tx: usize, m_rx: usize, snr_db: f64, key: SeedKey) -> Result<MimoInstance> {
    let mut s = key.stream();
    let sigma2 = noise_variance(n_tx, snr_db);
    let h: Vec<Complex64> = (0..m_rx * n_tx).map(|_| s.complex_normal()).collect();
    let x: Vec<Complex64> = (0..n_tx).map(|_| Constellation::Qpsk.sample(&mut s)).collect();
    let sd = sigma2.sqrt();
    let y = (0..m_rx)
        .map(|i| (0..n_tx).map(|j| h[i * n_tx + j] * x[j]).sum::<Complex64>() + s.complex_normal() * sd)
        .collect();
    MimoInstance::new(m_rx, n_tx, h, y, sigma2, x)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OampParams {
    pub layers: usize,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub constellation: Constellation,
}

impl OampParams {
    /// `γ = θ = 1` in every layer.
    pub fn fixed(layers: usize) -> Self {
        Self { layers, gamma: vec![1.0; layers], theta: vec![1.0; layers], constellation: Constellation::Qpsk }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::config("OAMP needs at least one layer"));
        }
        if self.gamma.len() != self.layers {
            return Err(Error::dim("gamma", self.layers, self.gamma.len()));
        }
        if self.theta.len() != self.layers {
            return Err(Error::dim("theta", self.layers, self.theta.len()));
        }
        if self.gamma.iter().chain(&self.theta).any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite OAMP parameter"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OampState<S = f64> {
    pub x: Vec<Complex<S>>,
    pub r: Vec<Complex<S>>,
    pub v2: S,
    pub tau2: S,
    /// Set once any layer needed the ridge to solve its LMMSE system.
    pub regularized: bool,
}

impl<S: Scalar> OampState<S> {
    pub fn initial(n_tx: usize) -> Self {
        let zero = Complex::new(S::zero(), S::zero());
        Self { x: vec![zero; n_tx], r: vec![zero; n_tx], v2: S::one(), tau2: S::one(), regularized: false }
    }
}

/// Posterior mean of a QPSK symbol observed in complex Gaussian noise of
/// variance `tau2`.
pub fn mmse_denoiser(r: &[Complex64], tau2: f64, constellation: Constellation) -> Result<Vec<Complex64>> {
    if !(tau2 > 0.0) {
        return Err(Error::domain("tau2 must be positive"));
    }
    Ok(denoise(r, tau2, constellation))
}

fn denoise<S: Scalar>(r: &[Complex<S>], tau2: S, _constellation: Constellation) -> Vec<Complex<S>> {
    let a = S::from_f64(FRAC_1_SQRT_2);
    let k = S::from_f64(2f64.sqrt()) / tau2;
    r.iter().map(|z| Complex::new(a * (k * z.re).tanh(), a * (k * z.im).tanh())).collect()
}

fn lift<S: Scalar>(z: &[Complex64]) -> Vec<Complex<S>> {
    z.iter().map(|c| Complex::new(S::from_f64(c.re), S::from_f64(c.im))).collect()
}

fn conj<S: Scalar>(z: Complex<S>) -> Complex<S> {
    Complex::new(z.re, -z.im)
}

/// Solves `A X = B` for square `A` (`n × n`) and `B` (`n × m`) by Gaussian
/// elimination with partial pivoting. Returns `None` on a numerically zero
/// pivot.
fn solve<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>], n: usize, m: usize) -> Option<Vec<Complex<S>>> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let scale = a.iter().map(|z| z.norm_sqr().value()).fold(0.0, f64::max).sqrt();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, a[r * n + col].norm_sqr().value()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(mag.sqrt() > f64::EPSILON * scale) {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            for c in 0..m {
                b.swap(col * m + c, piv * m + c);
            }
        }
        let p = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            if f.re.value() == 0.0 && f.im.value() == 0.0 {
                continue;
            }
            for c in col..n {
                let t = a[col * n + c];
                a[row * n + c] = a[row * n + c] - f * t;
            }
            for c in 0..m {
                let t = b[col * m + c];
                b[row * m + c] = b[row * m + c] - f * t;
            }
        }
    }
    for col in (0..n).rev() {
        let p = a[col * n + col];
        for c in 0..m {
            let mut acc = b[col * m + c];
            for k in col + 1..n {
                acc = acc - a[col * n + k] * b[k * m + c];
            }
            b[col * m + c] = acc / p;
        }
    }
    Some(b)
}

/// `A⁻¹B`, adding a ridge to the diagonal of `A` if it is singular. The flag
/// reports whether the ridge was needed.
fn solve_ridged<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>], n: usize, m: usize) -> (Vec<Complex<S>>, bool) {
    if let Some(x) = solve(a, b, n, m) {
        return (x, false);
    }
    let mut a = a.to_vec();
    for i in 0..n {
        a[i * n + i] = a[i * n + i] + Complex::new(S::from_f64(RIDGE), S::zero());
    }
    match solve(&a, b, n, m) {
        Some(x) => (x, true),
        None => (vec![Complex::new(S::zero(), S::zero()); n * m], true),
    }
}

/// One layer in scalar type `S`. With `freeze_w`, `W` is built from a
/// detached `v²`, so derivatives do not flow through it.
pub fn oamp_layer_generic<S: Scalar>(
    state: &OampState<S>,
    inst: &MimoInstance,
    gamma: S,
    theta: S,
    freeze_w: bool,
) -> OampState<S> {
    let (m, n) = (inst.m_rx, inst.n_tx);
    let h: Vec<Complex<S>> = lift(&inst.h);
    let y: Vec<Complex<S>> = lift(&inst.y);
    let sigma2 = S::from_f64(inst.sigma2);
    let zero = Complex::new(S::zero(), S::zero());

    let resid: Vec<Complex<S>> = (0..m)
        .map(|i| (0..n).fold(y[i], |acc, j| acc - h[i * n + j] * state.x[j]))
        .collect();
    let resid_energy = resid.iter().fold(S::zero(), |acc, z| acc + z.norm_sqr());
    let tr_hh = S::from_f64(inst.h.iter().map(|z| z.norm_sqr()).sum());
    let v2 = ((resid_energy - S::from_f64(m as f64) * sigma2) / tr_hh).max_f64(VARIANCE_FLOOR);
    let v2_w = if freeze_w { v2.detach() } else { v2 };

    // A = v²HHᴴ + σ²I, then Ŵ = v² Hᴴ A⁻¹ = v² (A⁻¹ H)ᴴ since A is Hermitian.
    let mut a = vec![zero; m * m];
    for i in 0..m {
        for k in 0..m {
            let dot = (0..n).fold(zero, |acc, j| acc + h[i * n + j] * conj(h[k * n + j]));
            a[i * m + k] = dot * v2_w;
        }
        a[i * m + i] = a[i * m + i] + Complex::new(sigma2, S::zero());
    }
    let (ainv_h, regularized) = solve_ridged(&a, &h, m, n);
    let mut w = vec![zero; n * m];
    for j in 0..n {
        for i in 0..m {
            w[j * m + i] = conj(ainv_h[i * n + j]) * v2_w;
        }
    }
    // WH and its trace, for the normalization Tr(WH) = N.
    let wh_raw: Vec<Complex<S>> = (0..n * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            (0..m).fold(zero, |acc, i| acc + w[r * m + i] * h[i * n + c])
        })
        .collect();
    let tr = (0..n).fold(zero, |acc, j| acc + wh_raw[j * n + j]);
    let norm = if tr.norm_sqr().value() > 0.0 { Complex::new(S::from_f64(n as f64), S::zero()) / tr } else { zero };
    let w: Vec<Complex<S>> = w.iter().map(|&z| z * norm).collect();
    let wh: Vec<Complex<S>> = wh_raw.iter().map(|&z| z * norm).collect();

    let r: Vec<Complex<S>> = (0..n)
        .map(|j| {
            let we = (0..m).fold(zero, |acc, i| acc + w[j * m + i] * resid[i]);
            state.x[j] + we * gamma
        })
        .collect();

    let mut tr_cc = S::zero();
    for r_ in 0..n {
        for c in 0..n {
            let id = if r_ == c { S::one() } else { S::zero() };
            let cz = Complex::new(id, S::zero()) - wh[r_ * n + c] * theta;
            tr_cc = tr_cc + cz.norm_sqr();
        }
    }
    let tr_ww = w.iter().fold(S::zero(), |acc, z| acc + z.norm_sqr());
    let nn = S::from_f64(n as f64);
    let tau2 = ((tr_cc * v2 + theta * theta * sigma2 * tr_ww) / nn).max_f64(VARIANCE_FLOOR);
    let x = denoise(&r, tau2, Constellation::Qpsk);
    OampState { x, r, v2, tau2, regularized: state.regularized || regularized }
}

pub fn oamp_layer(state: &OampState, inst: &MimoInstance, gamma: f64, theta: f64) -> Result<OampState> {
    if state.x.len() != inst.n_tx {
        return Err(Error::dim("OAMP state", inst.n_tx, state.x.len()));
    }
    let next = oamp_layer_generic(state, inst, gamma, theta, false);
    if !next.v2.is_finite() || !next.tau2.is_finite() || next.x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numeric("OAMP layer produced a non-finite value"));
    }
    Ok(next)
}

/// Output of [`oamp_detect`].
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub soft: Vec<Complex64>,
    pub hard: Vec<Complex64>,
    pub final_state: OampState,
}

/// Runs all layers from `x = 0`.
pub fn oamp_detect(inst: &MimoInstance, params: &OampParams) -> Result<Detection> {
    params.validate()?;
    let mut state = OampState::initial(inst.n_tx);
    for t in 0..params.layers {
        state = oamp_layer(&state, inst, params.gamma[t], params.theta[t])?;
    }
    let hard = state.x.iter().map(|&z| params.constellation.hard_decision(z)).collect();
    Ok(Detection { soft: state.x.clone(), hard, final_state: state })
}

/// Linear MMSE estimate `Hᴴ(HHᴴ + σ²I)⁻¹y` followed by hard decisions.
pub fn lmmse_detect(inst: &MimoInstance) -> Vec<Complex64> {
    let (m, n) = (inst.m_rx, inst.n_tx);
    let h = &inst.h;
    let mut a = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for k in 0..m {
            a[i * m + k] = (0..n).map(|j| h[i * n + j] * h[k * n + j].conj()).sum();
        }
        a[i * m + i] += inst.sigma2;
    }
    let (z, _) = solve_ridged(&a, &inst.y, m, 1);
    (0..n)
        .map(|j| Constellation::Qpsk.hard_decision((0..m).map(|i| h[i * n + j].conj() * z[i]).sum()))
        .collect()
}

/// Exhaustive search for `argmin ‖y − Hx‖²` over all QPSK vectors; ties go to
/// the first hypothesis in base-4 counting order.
pub fn ml_detect(inst: &MimoInstance) -> Result<Vec<Complex64>> {
    let (m, n) = (inst.m_rx, inst.n_tx);
    if n > ML_MAX_TX {
        return Err(Error::Size { requested: 4u128.pow(n as u32), limit: 4u128.pow(ML_MAX_TX as u32) });
    }
    let pts = Constellation::Qpsk.points();
    let mut idx = vec![0usize; n];
    let mut best = (f64::INFINITY, vec![pts[0]; n]);
    let mut x = vec![pts[0]; n];
    loop {
        for j in 0..n {
            x[j] = pts[idx[j]];
        }
        let dist: f64 = (0..m)
            .map(|i| (inst.y[i] - (0..n).map(|j| inst.h[i * n + j] * x[j]).sum::<Complex64>()).norm_sqr())
            .sum();
        if dist < best.0 {
            best = (dist, x.clone());
        }
        let mut j = 0;
        while j < n && idx[j] == 3 {
            idx[j] = 0;
            j += 1;
        }
        if j == n {
            break;
        }
        idx[j] += 1;
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Detector {
    Oamp { params: OampParams },
    Lmmse,
    Ml,
    /// Returns the transmitted symbols.
    Genie,
    /// Uniform guesses, independent of the observation.
    Random,
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::Oamp { .. } => "oamp",
            Detector::Lmmse => "lmmse",
            Detector::Ml => "ml",
            Detector::Genie => "genie",
            Detector::Random => "random",
        }
    }

    /// Hard decisions for `inst`; `key` feeds the random detector only.
    pub fn detect(&self, inst: &MimoInstance, key: SeedKey) -> Result<Vec<Complex64>> {
        match self {
            Detector::Oamp { params } => Ok(oamp_detect(inst, params)?.hard),
            Detector::Lmmse => Ok(lmmse_detect(inst)),
            Detector::Ml => ml_detect(inst),
            Detector::Genie => Ok(inst.x_true.clone()),
            Detector::Random => {
                let mut s = key.stream();
                Ok((0..inst.n_tx).map(|_| Constellation::Qpsk.sample(&mut s)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SerResult {
    pub ser: f64,
    /// 95% normal-approximation binomial half-width.
    pub ci_half_width: f64,
    pub trials: usize,
    pub symbols: usize,
    pub errors: usize,
}

pub const Z95: f64 = 1.959_963_984_540_054;

const TAG_DETECTOR: u64 = 0x6465_7465_6374_0000;

/// Instance of trial `t` in an SER run keyed by `key`.
pub fn trial_instance(n_tx: usize, m_rx: usize, snr_db: f64, key: SeedKey, t: usize) -> Result<MimoInstance> {
    sample_mimo(n_tx, m_rx, snr_db, crate::netgen::instance_key(key, t))
}

/// Symbol errors of `detector` on trial `t`.
pub fn trial_errors(detector: &Detector, n_tx: usize, m_rx: usize, snr_db: f64, key: SeedKey, t: usize) -> Result<usize> {
    let inst = trial_instance(n_tx, m_rx, snr_db, key, t)?;
    let guess = detector.detect(&inst, crate::netgen::instance_key(key.derive(TAG_DETECTOR), t))?;
    Ok(guess.iter().zip(&inst.x_true).filter(|(g, x)| (*g - *x).norm() > 1e-9).count())
}

fn check_trials(n_trials: usize) -> Result<()> {
    if n_trials < 1000 {
        return Err(Error::domain("SER evaluation needs at least 1000 trials"));
    }
    Ok(())
}

pub fn ser_from_errors(errors: usize, trials: usize, n_tx: usize) -> SerResult {
    let symbols = trials * n_tx;
    let ser = errors as f64 / symbols as f64;
    let ci_half_width = Z95 * (ser * (1.0 - ser) / symbols as f64).sqrt();
    SerResult { ser, ci_half_width, trials, symbols, errors }
}

/// Monte-Carlo symbol error rate over `n_trials` fresh channels.
pub fn ser_eval(detector: &Detector, n_tx: usize, m_rx: usize, snr_db: f64, n_trials: usize, key: SeedKey) -> Result<SerResult> {
    check_trials(n_trials)?;
    let mut errors = 0;
    for t in 0..n_trials {
        errors += trial_errors(detector, n_tx, m_rx, snr_db, key, t).map_err(|e| e.at_index(t))?;
    }
    Ok(ser_from_errors(errors, n_trials, n_tx))
}

/// Two detectors on the same trials.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairedSer {
    pub a: SerResult,
    pub b: SerResult,
    /// `ser_a − ser_b`.
    pub difference: f64,
    /// 95% half-width of the difference from per-trial paired differences.
    pub ci_half_width: f64,
}

impl PairedSer {
    /// `a` is no worse than `b` within the paired confidence interval.
    pub fn a_not_worse(&self) -> bool {
        self.difference <= self.ci_half_width
    }
}

pub fn paired_from_errors(a: &[usize], b: &[usize], n_tx: usize) -> PairedSer {
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64) / n_tx as f64).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n.max(2) - 1) as f64;
    PairedSer {
        a: ser_from_errors(a.iter().sum(), n, n_tx),
        b: ser_from_errors(b.iter().sum(), n, n_tx),
        difference: mean,
        ci_half_width: Z95 * (var / n as f64).sqrt(),
    }
}

pub fn ser_paired(a: &Detector, b: &Detector, n_tx: usize, m_rx: usize, snr_db: f64, n_trials: usize, key: SeedKey) -> Result<PairedSer> {
    check_trials(n_trials)?;
    let mut ea = Vec::with_capacity(n_trials);
    let mut eb = Vec::with_capacity(n_trials);
    for t in 0..n_trials {
        ea.push(trial_errors(a, n_tx, m_rx, snr_db, key, t).map_err(|e| e.at_index(t))?);
        eb.push(trial_errors(b, n_tx, m_rx, snr_db, key, t).map_err(|e| e.at_index(t))?);
    }
    Ok(paired_from_errors(&ea, &eb, n_tx))
}

#[cfg(test)]
mod tests;
