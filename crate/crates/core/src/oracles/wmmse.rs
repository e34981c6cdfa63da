//! WMMSE power control for the single-antenna interference channel.
//!
//! Block-coordinate updates of the receive coefficient `u`, the MSE weight
//! `w`, and the transmit amplitude `v = sqrt(p)`, starting from full power.

use alloc::vec;
use alloc::vec::Vec;


use super::{sum_rate, PowerAllocation};
use crate::error::{Error, Result};
use crate::netgen::NetworkInstance;
use crate::rng::SeedKey;
#[allow(unused_imports)]
use crate::float::*;

pub const WMMSE_DEFAULT_ITERS: usize = 100;
pub const WMMSE_DEFAULT_TOL: f64 = 1e-9;

struct State {
    v: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
}

fn refresh_receivers(instance: &NetworkInstance, amp: &[f64], st: &mut State) {
    for k in 0..instance.k {
        let row = instance.row(k);
        let received: f64 = row.iter().zip(amp).map(|(g, a)| g * a * a).sum::<f64>() + instance.noise_power;
        let signal = instance.gain(k, k) * amp[k] * amp[k];
        st.u[k] = instance.gain(k, k).sqrt() * amp[k] / received;
        // 1 / (1 - u h v) written as 1 + SINR
        st.w[k] = received / (received - signal);
    }
}

/// Runs WMMSE and returns the allocation plus the sum rate before the first
/// update and after every iteration.
pub fn wmmse_trace(
    instance: &NetworkInstance,
    max_iters: usize,
    tol: f64,
) -> Result<(PowerAllocation, Vec<f64>)> {
    wmmse_trace_from(instance, &vec![instance.p_max; instance.k], max_iters, tol)
}

/// [`wmmse_trace`] started from the feasible power vector `init`.
pub fn wmmse_trace_from(
    instance: &NetworkInstance,
    init: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<(PowerAllocation, Vec<f64>)> {
    if max_iters == 0 {
        return Err(Error::domain("max_iters must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tol must be positive"));
    }
    let k = instance.k;
    let v_max = instance.p_max.sqrt();
    if init.len() != k {
        return Err(Error::dim("initial power", k, init.len()));
    }
    if init.iter().any(|p| !(0.0..=instance.p_max).contains(p)) {
        return Err(Error::domain("initial power outside [0, p_max]"));
    }
    let mut st = State { v: init.iter().map(|p| p.sqrt()).collect(), u: vec![0.0; k], w: vec![0.0; k] };
    let amp = st.v.clone();
    refresh_receivers(instance, &amp, &mut st);

    let power = |v: &[f64]| -> Vec<f64> { v.iter().map(|a| (a * a).min(instance.p_max)).collect() };
    let mut rates = vec![sum_rate(instance, &power(&st.v))?];
    let mut iterations = 0;
    for iter in 1..=max_iters {
        for user in 0..k {
            let numer = st.w[user] * st.u[user] * instance.gain(user, user).sqrt();
            let denom: f64 = (0..k).map(|j| instance.gain(j, user) * st.u[j] * st.u[j] * st.w[j]).sum();
            let v = if denom > 0.0 {
                numer / denom
            } else if numer > 0.0 {
                v_max
            } else {
                0.0
            };
            if !v.is_finite() {
                return Err(Error::numeric(alloc::format!("non-finite amplitude at iteration {iter}")));
            }
            st.v[user] = v.clamp(0.0, v_max);
        }
        let amp = st.v.clone();
        refresh_receivers(instance, &amp, &mut st);
        if st.u.iter().chain(&st.w).any(|x| !x.is_finite()) {
            return Err(Error::numeric(alloc::format!("non-finite receiver state at iteration {iter}")));
        }
        let rate = sum_rate(instance, &power(&st.v))?;
        let improvement = rate - rates[rates.len() - 1];
        rates.push(rate);
        iterations = iter;
        if improvement < tol {
            break;
        }
    }
    let p = power(&st.v);
    let achieved_rate = rates[rates.len() - 1];
    Ok((PowerAllocation { p, achieved_rate, iterations }, rates))
}

/// Extra pseudo-random starting points tried by [`wmmse`].
pub const WMMSE_RESTARTS: usize = 4;

const RESTART_SEED: u64 = 0x574d_4d53_4500;

/// WMMSE from full power and from [`WMMSE_RESTARTS`] fixed pseudo-random
/// starting points; returns the best run (earliest on ties).
///
/// The starting points depend only on `k`, so the result is a pure function
/// of the instance.
pub fn wmmse(instance: &NetworkInstance, max_iters: usize, tol: f64) -> Result<PowerAllocation> {
    let (mut best, _) = wmmse_trace(instance, max_iters, tol)?;
    for r in 0..WMMSE_RESTARTS {
        let mut s = SeedKey::new(RESTART_SEED, r as u64).stream();
        let init: Vec<f64> = (0..instance.k).map(|_| instance.p_max * s.uniform()).collect();
        let (candidate, _) = wmmse_trace_from(instance, &init, max_iters, tol)?;
        if candidate.achieved_rate > best.achieved_rate {
            best = candidate;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{sample_instance, ChannelModel};
    use crate::oracles::{brute_force, extreme_instance};

    #[test]
    fn single_user_uses_full_power() {
        let inst = NetworkInstance::new(1, vec![2.5], 1.0, 1.0).unwrap();
        let out = wmmse(&inst, 100, 1e-9).unwrap();
        assert_eq!(out.p, vec![1.0]);
        assert!((out.achieved_rate - 3.5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn extreme_matrix_reaches_binary_optimum() {
        let inst = extreme_instance();
        let out = wmmse(&inst, 100, 1e-9).unwrap();
        let bf = brute_force(&inst, 2).unwrap();
        assert!(out.achieved_rate >= 13.28, "rate {} p {:?}", out.achieved_rate, out.p);
        assert!(out.achieved_rate >= bf.achieved_rate - 1e-3);
    }

    #[test]
    fn rate_is_monotone() {
        for i in 0..50 {
            let inst = sample_instance(4, &ChannelModel::RayleighIid, SeedKey::new(99, i)).unwrap();
            let (_, rates) = wmmse_trace(&inst, 100, 1e-12).unwrap();
            for w in rates.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "instance {i}: {w:?}");
            }
        }
    }

    #[test]
    fn invalid_arguments() {
        let inst = extreme_instance();
        assert!(wmmse(&inst, 0, 1e-9).is_err());
        assert!(wmmse(&inst, 10, 0.0).is_err());
    }

    #[test]
    fn achieved_rate_is_consistent() {
        let inst = sample_instance(5, &ChannelModel::RayleighIid, SeedKey::new(1, 1)).unwrap();
        let out = wmmse(&inst, 100, 1e-9).unwrap();
        assert!((sum_rate(&inst, &out.p).unwrap() - out.achieved_rate).abs() < 1e-9);
        assert!(out.p.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}
