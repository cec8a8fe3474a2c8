use super::common::{
    finish, non_termination, push_record, rng_for, stationary_stop, Outcome, RecordInput,
};
use super::prune::naive_prune;
use super::trace::{EstimateReport, RunTrace, Stage};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::geometry::project_kl_deleted_simplex;
use crate::objectives::{eval_mean_bounded, mwu_threshold_mean, Task};
use crate::{TaskObjective, TaskParams, WeightVector, WeightedDataset};

/// Explicit low-regret solver for the bounded-covariance mean.
///
/// Expects data that has been pruned and recentered so that
/// `‖X_i‖ ≤ σ√(d/ε)/2`; see [`mwu_solve_pruned`]. When the data reaches
/// further out, the bound `B` on `|g|` is taken from the data instead, which
/// keeps every multiplicative factor at least `1/2`, and a warning is recorded.
pub fn mwu_solve(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    objective.validate()?;
    cfg.validate()?;
    let TaskParams::MeanBoundedCov { sigma2 } = objective.params else {
        return Err(Error::Unsupported(format!(
            "the low-regret mean solver with {:?}",
            objective.task()
        )));
    };
    let eps = objective.epsilon;
    let (n, d) = (data.n(), data.d() as f64);
    let threshold = match objective.threshold {
        Some(xi) => xi,
        None => mwu_threshold_mean(eps, sigma2, cfg.eta)?,
    };

    let mut warnings = Vec::new();
    let b_theory = if eps > 0.0 {
        sigma2 * d / eps
    } else {
        f64::INFINITY
    };
    let b_data = 4.0 * max_norm_sq(data);
    let b = if b_data > b_theory {
        warnings.push(format!(
            "points reach beyond σ√(d/ε)/2; using B = {b_data:.6e} from the data instead of σ²d/ε = {b_theory:.6e}"
        ));
        b_data
    } else {
        b_theory
    };
    let step = cfg.eta / (2.0 * b);
    let bound = if eps > 0.0 {
        (b * eps).max(d) / (cfg.eta * sigma2)
    } else {
        d / (cfg.eta * sigma2)
    };
    let cap = cfg.cap(10 * bound.ceil().max(1.0) as usize);

    let mut trace = RunTrace::new(
        Task::MeanBoundedCov,
        "explicit_low_regret",
        n,
        eps,
        threshold,
        cap,
    );
    trace.step_bound = Some(b);
    trace.step_size = Some(step);
    trace.warnings = warnings;

    let mut q = initial_weights(cfg, n, eps)?;
    let mut rng = rng_for(cfg.seed);
    let mask = data.good_mask();
    loop {
        let eval = eval_mean_bounded(data, &q, cfg.gamma, &mut rng)?;
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

/// Prunes with [`naive_prune`], recenters, runs [`mwu_solve`], and maps the
/// weights back to the original rows (pruned rows get weight zero).
pub fn mwu_solve_pruned(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
    alpha: f64,
) -> Result<EstimateReport> {
    let TaskParams::MeanBoundedCov { sigma2 } = objective.params else {
        return Err(Error::Unsupported(format!(
            "the low-regret mean solver with {:?}",
            objective.task()
        )));
    };
    let pruned = naive_prune(data, sigma2.sqrt(), objective.epsilon, alpha)?;
    let sub = data
        .subset(&pruned.kept)?
        .translated(&pruned.center_vector());
    let removed = data.n() - pruned.kept.len();
    let lift = |report: &mut EstimateReport| -> Result<()> {
        let mut full = vec![0.0; data.n()];
        for (k, &i) in pruned.kept.iter().enumerate() {
            full[i] = report.weights[k];
        }
        let q = WeightVector::new(full)?;
        report.estimate = super::common::estimate_for(report.task, data, &q)?;
        report.weights = q;
        if removed > 0 {
            report
                .warnings
                .push(format!("pruned {removed} points before reweighting"));
        }
        Ok(())
    };
    match mwu_solve(&sub, objective, cfg) {
        Ok(mut report) => {
            lift(&mut report)?;
            Ok(report)
        }
        Err(Error::NonTermination {
            iterations,
            mut last,
            trace,
        }) => {
            lift(&mut last)?;
            Err(Error::NonTermination {
                iterations,
                last,
                trace,
            })
        }
        Err(e) => Err(e),
    }
}

pub(crate) fn max_norm_sq(data: &WeightedDataset) -> f64 {
    data.points()
        .row_iter()
        .map(|r| r.norm_squared())
        .fold(0.0, f64::max)
}

pub(crate) fn initial_weights(cfg: &SolverConfig, n: usize, eps: f64) -> Result<WeightVector> {
    match &cfg.init {
        None => Ok(WeightVector::uniform(n)),
        Some(w) if w.len() != n => Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        }),
        Some(w) if w.is_in_deleted_simplex(eps, 0.0) => Ok(w.clone()),
        Some(w) => project_kl_deleted_simplex(w.as_slice(), eps),
    }
}
