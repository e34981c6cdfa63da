use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::netgen::NetworkInstance;
#[allow(unused_imports)]
use crate::float::*;

fn check_power(instance: &NetworkInstance, p: &[f64]) -> Result<()> {
    if p.len() != instance.k {
        return Err(Error::dim("power vector", instance.k, p.len()));
    }
    if let Some((i, v)) = p.iter().enumerate().find(|(_, &v)| !(0.0..=instance.p_max).contains(&v)) {
        return Err(Error::domain(alloc::format!(
            "p[{i}] = {v} outside [0, {}]",
            instance.p_max
        )));
    }
    Ok(())
}

/// Interference-plus-noise seen by user `k`.
fn interference(instance: &NetworkInstance, p: &[f64], k: usize) -> f64 {
    let row = instance.row(k);
    let mut total = instance.noise_power;
    for (i, (&g, &pi)) in row.iter().zip(p).enumerate() {
        if i != k {
            total += g * pi;
        }
    }
    total
}

/// Per-user rates `log2(1 + SINR_k)`.
pub fn user_rates(instance: &NetworkInstance, p: &[f64]) -> Result<Vec<f64>> {
    check_power(instance, p)?;
    Ok((0..instance.k)
        .map(|k| {
            let signal = instance.gain(k, k) * p[k];
            (signal / interference(instance, p, k)).ln_1p() / core::f64::consts::LN_2
        })
        .collect())
}

/// Unweighted sum rate in bits per channel use.
pub fn sum_rate(instance: &NetworkInstance, p: &[f64]) -> Result<f64> {
    Ok(user_rates(instance, p)?.iter().sum())
}

/// Gradient of [`sum_rate`] with respect to `p`.
pub fn sum_rate_gradient(instance: &NetworkInstance, p: &[f64]) -> Result<Vec<f64>> {
    check_power(instance, p)?;
    let k = instance.k;
    let mut grad = alloc::vec![0.0; k];
    for user in 0..k {
        let noise_int = interference(instance, p, user);
        let total = noise_int + instance.gain(user, user) * p[user];
        let row = instance.row(user);
        for (j, &g) in row.iter().enumerate() {
            let d = if j == user { g / total } else { g / total - g / noise_int };
            grad[j] += d / core::f64::consts::LN_2;
        }
    }
    Ok(grad)
}
