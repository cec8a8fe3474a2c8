//! Iterative solvers that reweight the data until the task objective is small.
//!
//! Two families are provided. The filter keeps unnormalized weights `c` and
//! multiplies them by `1 - g_i / g_max`, zeroing at least one point per step.
//! The explicit low-regret solver multiplies `q` by `1 - η g_i` and projects
//! back onto `Δ_{n,ε}` in KL divergence.

mod common;
mod filter;
mod identity;
mod invariance;
mod mwu;
mod prune;
mod regression;
mod trace;

pub use filter::filter_solve;
pub use identity::identity_solve;
pub use invariance::{invariance_monitor, InvarianceCheck, InvarianceReport};
pub use mwu::{mwu_solve, mwu_solve_pruned};
pub use prune::{naive_prune, PruneResult};
pub use regression::regression_solve;
pub use trace::{
    Estimate, EstimateReport, GoodSetStats, IterationRecord, RunTrace, Stage, StopReason,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Task;
use crate::{TaskObjective, WeightVector, WeightedDataset};

/// Environment variable consulted for the seed when none is given.
pub const SEED_ENV: &str = "QUASIGRAD_SEED";

/// The generator behind every seeded routine in the crate.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Returns the seed in `QUASIGRAD_SEED`, if set and parseable.
pub fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Filter,
    ExplicitLowRegret,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Low-regret step parameter.
    pub eta: f64,
    /// Relative precision of the power iteration.
    pub gamma: f64,
    /// Random restarts for the quartic objectives.
    pub restarts: usize,
    /// Tightens the built-in iteration safeguard.
    pub max_iters: Option<usize>,
    pub seed: u64,
    /// Store full weight vectors in every trace record.
    pub record_weights: bool,
    /// Starting weights for the low-regret solvers.
    pub init: Option<WeightVector>,
    /// Low-regret solvers also stop once `max_p ⟨g, q - p⟩ ≤ tol · F(q)`.
    pub stationarity_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Filter,
            eta: 1.0,
            gamma: 0.01,
            restarts: crate::geometry::DEFAULT_RESTARTS,
            max_iters: None,
            seed: env_seed().unwrap_or(0),
            record_weights: false,
            init: None,
            stationarity_tol: None,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(
                "eta",
                format!("{} must be positive", self.eta),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param(
                "gamma",
                format!("{} is outside (0, 1)", self.gamma),
            ));
        }
        if let Some(t) = self.stationarity_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::param(
                    "stationarity_tol",
                    format!("{t} must be nonnegative"),
                ));
            }
        }
        if self.max_iters == Some(0) {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn cap(&self, safeguard: usize) -> usize {
        self.max_iters.map_or(safeguard, |m| m.min(safeguard))
    }
}

/// Runs the solver matching the task and `cfg.algorithm`.
pub fn solve(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    match (objective.task(), cfg.algorithm) {
        (Task::MeanBoundedCov | Task::Joint, Algorithm::Filter) => {
            filter_solve(data, objective, cfg)
        }
        (Task::MeanBoundedCov, Algorithm::ExplicitLowRegret) => mwu_solve(data, objective, cfg),
        (Task::MeanIdentityCov, Algorithm::ExplicitLowRegret) => {
            identity_solve(data, objective, cfg)
        }
        (Task::Regression, Algorithm::Filter) => regression_solve(data, objective, cfg),
        (task, algorithm) => Err(Error::Unsupported(format!("{algorithm:?} with {task:?}"))),
    }
}
