use alloc::vec;

use super::{sum_rate, PowerAllocation};
use crate::error::{Error, Result};
use crate::netgen::NetworkInstance;

/// Upper bound on the number of grid points visited.
pub const BRUTE_FORCE_LIMIT: u128 = 2_000_000;

/// 11 levels for up to four users, on/off for five or six.
pub fn default_grid_points(k: usize) -> usize {
    if k <= 4 {
        11
    } else {
        2
    }
}

/// Exhaustive search over `{0, p_max/(g-1), ..., p_max}^K`.
///
/// Points are visited in lexicographic order and only a strictly better
/// rate replaces the incumbent, so ties resolve to the lexicographically
/// smallest power vector.
pub fn brute_force(instance: &NetworkInstance, grid_points: usize) -> Result<PowerAllocation> {
    if grid_points < 2 {
        return Err(Error::domain("grid_points must be at least 2"));
    }
    let k = instance.k;
    let total = (grid_points as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if total > BRUTE_FORCE_LIMIT {
        return Err(Error::Size { requested: total, limit: BRUTE_FORCE_LIMIT });
    }
    let step = instance.p_max / (grid_points - 1) as f64;
    let level = |i: usize| if i == grid_points - 1 { instance.p_max } else { i as f64 * step };

    let mut digits = vec![0usize; k];
    let mut p = vec![0.0; k];
    let mut best_p = p.clone();
    let mut best_rate = f64::NEG_INFINITY;
    let mut visited = 0;
    loop {
        for (pi, &d) in p.iter_mut().zip(&digits) {
            *pi = level(d);
        }
        let rate = sum_rate(instance, &p)?;
        visited += 1;
        if rate > best_rate {
            best_rate = rate;
            best_p.copy_from_slice(&p);
        }
        // odometer increment, last coordinate fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(PowerAllocation { p: best_p, achieved_rate: best_rate, iterations: visited });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < grid_points {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::extreme_instance;

    #[test]
    fn single_user_grid() {
        let inst = NetworkInstance::new(1, vec![0.7], 1.0, 1.0).unwrap();
        assert_eq!(brute_force(&inst, 11).unwrap().p, vec![1.0]);
    }

    #[test]
    fn extreme_matrix_binary_optimum() {
        let out = brute_force(&extreme_instance(), 2).unwrap();
        assert_eq!(out.p, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(out.iterations, 32);
    }

    #[test]
    fn decoupled_users_use_full_power() {
        let inst = NetworkInstance::new(2, vec![1.0, 0.0, 0.0, 1.0], 1.0, 1.0).unwrap();
        assert_eq!(brute_force(&inst, 11).unwrap().p, vec![1.0, 1.0]);
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        // two identical users that destroy each other: on/off for either is optimal
        let inst = NetworkInstance::new(2, vec![1.0, 1e12, 1e12, 1.0], 1.0, 1.0).unwrap();
        assert_eq!(brute_force(&inst, 2).unwrap().p, vec![0.0, 1.0]);
    }

    #[test]
    fn guard_is_enforced() {
        let inst = NetworkInstance::new(7, vec![1.0; 49], 1.0, 1.0).unwrap();
        assert!(matches!(brute_force(&inst, 11), Err(Error::Size { .. })));
        assert!(brute_force(&inst, 1).is_err());
        assert!(brute_force(&inst, 2).is_ok());
    }
}
