use super::common::{
    finish, non_termination, push_record, rng_for, FilterWeights, Outcome, RecordInput,
};
use super::filter::filter_safeguard;
use super::trace::{EstimateReport, RunTrace, Stage};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::objectives::{
    eval_regression_hyper, eval_regression_noise, regression_hyper_threshold,
    regression_noise_threshold, Task,
};
use crate::{TaskObjective, TaskParams, WeightedDataset};

/// Filter for linear regression.
///
/// Covariate hypercontractivity `F1` is brought under `κ'²` first; only then
/// is the noise objective `F2` checked against `σ'²`. Both are filtered with
/// the same update as the mean filter.
pub fn regression_solve(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    objective.validate()?;
    cfg.validate()?;
    if cfg.init.is_some() {
        return Err(Error::Unsupported("initial weights for the filter".into()));
    }
    let TaskParams::Regression {
        kappa2,
        sigma2,
        form,
        hyper_threshold,
    } = objective.params
    else {
        return Err(Error::Unsupported(format!(
            "the regression filter with {:?}",
            objective.task()
        )));
    };
    if data.responses().is_none() {
        return Err(Error::InvalidInput("regression needs responses".into()));
    }
    let eps = objective.epsilon;
    let kp2 = match hyper_threshold {
        Some(h) => h,
        None => regression_hyper_threshold(eps, kappa2)?,
    };
    let sp2 = match objective.threshold {
        Some(s) => s,
        None => regression_noise_threshold(eps, kappa2, sigma2, form)?,
    };
    let n = data.n();
    let cap = cfg.cap(filter_safeguard(n, eps));
    let mut rng = rng_for(cfg.seed);
    let mask = data.good_mask();
    let mut weights = FilterWeights::new(n);
    let mut trace = RunTrace::new(Task::Regression, "filter", n, eps, sp2, cap);
    let mut warned = false;

    loop {
        let q = weights.q()?;
        let mut hyper = eval_regression_hyper(data, &q, cfg.restarts, &mut rng)?;
        if hyper.value <= kp2 {
            let check = eval_regression_hyper(data, &q, 4 * cfg.restarts.max(1), &mut rng)?;
            if check.value > kp2 {
                hyper = check;
            }
        }
        let capped = trace.steps() >= cap;
        if hyper.value > kp2 {
            push_record(
                &mut trace,
                RecordInput {
                    stage: Stage::Hyper,
                    eval: &hyper,
                    threshold: kp2,
                    stepped: !capped,
                    q: &q,
                    c: Some(&weights.c),
                    mask: mask.as_deref(),
                    keep_vectors: cfg.record_weights,
                },
            );
            if capped {
                let noise = eval_regression_noise(data, &q)?.value;
                let out = Outcome {
                    q,
                    value: noise,
                    hyper: Some((hyper.value, kp2)),
                    seed: cfg.seed,
                };
                return Err(non_termination(data, trace, out));
            }
            weights.step(&hyper.g)?;
            continue;
        }

        let noise = eval_regression_noise(data, &q)?;
        if noise.pseudo_inverse && !trace.warnings.iter().any(|w| w.starts_with("singular")) {
            trace
                .warnings
                .push("singular normal equations; used a pseudo-inverse".into());
        }
        let done = noise.value <= sp2;
        if !done && !warned && hyper.value > 4.0 * kappa2 {
            warned = true;
            trace.warnings.push(format!(
                "weights are not 4κ²-hypercontractive before a noise step (F1 = {:.6e})",
                hyper.value
            ));
        }
        push_record(
            &mut trace,
            RecordInput {
                stage: Stage::Noise,
                eval: &noise,
                threshold: sp2,
                stepped: !done && !capped,
                q: &q,
                c: Some(&weights.c),
                mask: mask.as_deref(),
                keep_vectors: cfg.record_weights,
            },
        );
        let out = Outcome {
            q,
            value: noise.value,
            hyper: Some((hyper.value, kp2)),
            seed: cfg.seed,
        };
        if done {
            return finish(data, trace, out);
        }
        if capped {
            return Err(non_termination(data, trace, out));
        }
        weights.step(&noise.g)?;
    }
}
