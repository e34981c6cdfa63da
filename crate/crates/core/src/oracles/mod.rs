//! Classical reference algorithms.
//!
//! Sum-rate evaluation, WMMSE power control, exhaustive grid search,
//! a power-iteration eigensolver, and the Hoeffding mean-estimation demo.

mod brute;
mod eigen;
mod hoeffding;
mod rate;
mod wmmse;

pub use brute::{brute_force, default_grid_points, BRUTE_FORCE_LIMIT};
pub use eigen::{power_iteration, EigenProblem};
pub use hoeffding::{hoeffding_bound, hoeffding_coverage, BoundedDist, PacBound};
pub use rate::{sum_rate, sum_rate_gradient, user_rates};
pub use wmmse::{wmmse, wmmse_trace, wmmse_trace_from, WMMSE_DEFAULT_ITERS, WMMSE_DEFAULT_TOL, WMMSE_RESTARTS};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::netgen::NetworkInstance;

/// A power vector together with the sum rate it achieves.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    pub achieved_rate: f64,
    pub iterations: usize,
}

/// Label oracle used when generating datasets and measuring gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OracleName {
    Wmmse,
    BruteForce,
    None,
}

impl OracleName {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleName::Wmmse => "wmmse",
            OracleName::BruteForce => "brute_force",
            OracleName::None => "none",
        }
    }

    /// Runs the oracle with its default settings. `None` yields no
    /// allocation.
    pub fn solve(self, instance: &NetworkInstance) -> Result<Option<PowerAllocation>> {
        match self {
            OracleName::Wmmse => wmmse(instance, WMMSE_DEFAULT_ITERS, WMMSE_DEFAULT_TOL).map(Some),
            OracleName::BruteForce => {
                brute_force(instance, default_grid_points(instance.k)).map(Some)
            }
            OracleName::None => Ok(None),
        }
    }
}

impl core::str::FromStr for OracleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wmmse" => Ok(OracleName::Wmmse),
            "brute_force" | "brute-force" => Ok(OracleName::BruteForce),
            "none" => Ok(OracleName::None),
            other => Err(Error::config(alloc::format!(
                "unknown oracle `{other}` (expected wmmse, brute_force, none)"
            ))),
        }
    }
}

impl core::fmt::Display for OracleName {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The 5-user extreme channel used in the loss-mismatch example, with the
/// infinite couplings encoded as `1e12`.
pub fn extreme_instance() -> NetworkInstance {
    const INF: f64 = 1e12;
    #[rustfmt::skip]
    let gains = alloc::vec![
        100.0, 0.0,   INF, INF,   INF,
        0.0,   100.0, INF, INF,   INF,
        INF,   INF,   1.0, INF,   INF,
        INF,   INF,   INF, 100.0, 0.0,
        INF,   INF,   INF, 0.0,   99.9,
    ];
    NetworkInstance::new(5, gains, 1.0, 1.0).expect("constant instance is valid")
}
