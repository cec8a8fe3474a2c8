use super::common::{
    finish, non_termination, push_record, rng_for, FilterWeights, Outcome, RecordInput,
};
use super::trace::{EstimateReport, RunTrace, Stage};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::objectives::{
    eval_joint, eval_mean_bounded, filter_threshold_mean, joint_threshold, ObjectiveEval, Task,
};
use crate::{TaskObjective, TaskParams, WeightVector, WeightedDataset};

/// Filter for the bounded-covariance mean and for joint mean and covariance.
///
/// Each step zeroes the weight of the point with the largest `g` and shrinks the
/// others proportionally. The number of steps is capped at `2⌈εn⌉ + 10`.
pub fn filter_solve(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    objective.validate()?;
    cfg.validate()?;
    if cfg.init.is_some() {
        return Err(Error::Unsupported("initial weights for the filter".into()));
    }
    let task = objective.task();
    let (threshold, stage) = match objective.params {
        TaskParams::MeanBoundedCov { sigma2 } => (
            objective
                .threshold
                .unwrap_or_else(|| filter_threshold_mean(objective.epsilon, sigma2)),
            Stage::Mean,
        ),
        TaskParams::Joint { kappa2 } => (
            objective
                .threshold
                .unwrap_or_else(|| joint_threshold(kappa2)),
            Stage::Joint,
        ),
        _ => {
            return Err(Error::Unsupported(format!(
                "the filter solver with {task:?}"
            )))
        }
    };
    let n = data.n();
    let cap = cfg.cap(filter_safeguard(n, objective.epsilon));
    let mut rng = rng_for(cfg.seed);
    let mask = data.good_mask();
    let mut weights = FilterWeights::new(n);
    let mut trace = RunTrace::new(task, "filter", n, objective.epsilon, threshold, cap);

    let evaluate =
        |q: &WeightVector, restarts: usize, rng: &mut dyn rand::RngCore| -> Result<ObjectiveEval> {
            match task {
                Task::Joint => eval_joint(data, q, restarts, rng),
                _ => eval_mean_bounded(data, q, cfg.gamma, rng),
            }
        };

    loop {
        let q = weights.q()?;
        let mut eval = evaluate(&q, cfg.restarts, &mut rng)?;
        if task == Task::Joint && eval.value <= threshold {
            let check = evaluate(&q, 4 * cfg.restarts.max(1), &mut rng)?;
            if check.value > threshold {
                eval = check;
            }
        }
        let done = eval.value <= threshold;
        let capped = !done && trace.steps() >= cap;
        push_record(
            &mut trace,
            RecordInput {
                stage,
                eval: &eval,
                threshold,
                stepped: !done && !capped,
                q: &q,
                c: Some(&weights.c),
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
        weights.step(&eval.g)?;
    }
}

/// `2⌈εn⌉ + 10`.
pub(crate) fn filter_safeguard(n: usize, epsilon: f64) -> usize {
    2 * (epsilon * n as f64 - 1e-9).ceil().max(0.0) as usize + 10
}
