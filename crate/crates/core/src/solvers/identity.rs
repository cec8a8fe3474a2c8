use super::common::{
    finish, non_termination, push_record, rng_for, stationary_stop, Outcome, RecordInput,
};
use super::mwu::{initial_weights, max_norm_sq};
use super::trace::{EstimateReport, RunTrace, Stage};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::geometry::project_kl_deleted_simplex;
use crate::objectives::{eval_mean_identity, identity_threshold, Task};
use crate::{TaskObjective, TaskParams, WeightedDataset};

/// Low-regret solver for the mean when the good covariance is close to the identity.
///
/// Uses `g_i = (vᵀ(X_i - μ_q))² - 1` with step `βτ/(1+τ/2) · ε/(8d)` and stops
/// once `‖Σ_q‖ ≤ ξ`. The run is capped at `⌈64d/τ²⌉` steps.
pub fn identity_solve(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    objective.validate()?;
    cfg.validate()?;
    let TaskParams::MeanIdentityCov(p) = objective.params else {
        return Err(Error::Unsupported(format!(
            "the identity-covariance solver with {:?}",
            objective.task()
        )));
    };
    let eps = objective.epsilon;
    let (n, d) = (data.n(), data.d() as f64);
    let threshold = match objective.threshold {
        Some(xi) => xi,
        None => identity_threshold(eps, &p)?,
    };

    let mut step = p.beta * p.tau / (1.0 + p.tau / 2.0) * eps / (8.0 * d);
    let b_data = 4.0 * max_norm_sq(data);
    let mut warnings = Vec::new();
    if step * b_data > 0.5 {
        let reduced = 0.5 / b_data;
        warnings.push(format!(
            "points reach beyond √(d/ε); step reduced from {step:.6e} to {reduced:.6e}"
        ));
        step = reduced;
    }
    let cap = cfg.cap((64.0 * d / (p.tau * p.tau)).ceil() as usize);

    let mut trace = RunTrace::new(
        Task::MeanIdentityCov,
        "explicit_low_regret",
        n,
        eps,
        threshold,
        cap,
    );
    trace.step_bound = Some(b_data);
    trace.step_size = Some(step);
    trace.warnings = warnings;

    let mut q = initial_weights(cfg, n, eps)?;
    let mut rng = rng_for(cfg.seed);
    let mask = data.good_mask();
    loop {
        let eval = eval_mean_identity(data, &q, p.gamma.min(cfg.gamma), true, &mut rng)?;
        let done = eval.value <= threshold
            || stationary_stop(&mut trace, cfg.stationarity_tol, &eval, &q, eps)?;
        let capped = !done && (trace.steps() >= cap || step == 0.0);
        push_record(
            &mut trace,
            RecordInput {
                stage: Stage::Mean,
                eval: &eval,
                threshold,
                stepped: !done && !capped,
                q: &q,
                c: None,
                mask: mask.as_deref(),
                keep_vectors: cfg.record_weights,
            },
        );
        let outcome = Outcome {
            q,
            value: eval.value,
            hyper: None,
            seed: cfg.seed,
        };
        if done {
            return finish(data, trace, outcome);
        }
        if capped {
            return Err(non_termination(data, trace, outcome));
        }
        let tilde: Vec<f64> = outcome
            .q
            .as_slice()
            .iter()
            .zip(&eval.g)
            .map(|(w, g)| w * (1.0 - step * g))
            .collect();
        q = project_kl_deleted_simplex(&tilde, eps)?;
    }
}
