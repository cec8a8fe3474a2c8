use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use super::trace::{
    Estimate, EstimateReport, GoodSetStats, IterationRecord, RunTrace, Stage, StopReason,
};
use crate::data::moments_of;
use crate::error::{Error, Result};
use crate::objectives::{ols_theta, ObjectiveEval, Task};
use crate::{WeightVector, WeightedDataset};

/// Below this the largest quasi-gradient is treated as zero.
pub(crate) const STALL_TOLERANCE: f64 = 1e-14;

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    super::seeded_rng(seed)
}

/// Unnormalized filter weights, starting at `1/n`.
pub(crate) struct FilterWeights {
    pub c: Vec<f64>,
}

impl FilterWeights {
    pub fn new(n: usize) -> Self {
        Self {
            c: vec![1.0 / n as f64; n],
        }
    }

    pub fn q(&self) -> Result<WeightVector> {
        WeightVector::from_unnormalized(&self.c)
    }

    /// `c_i ← c_i (1 - g_i / g_max)` with `g_max` taken over the support.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        let g_max = support_max(&self.c, g);
        if g_max <= STALL_TOLERANCE {
            return Err(Error::StalledGradient { g_max });
        }
        for (c, &gi) in self.c.iter_mut().zip(g) {
            if *c > 0.0 {
                *c *= (1.0 - gi / g_max).max(0.0);
            }
        }
        Ok(())
    }
}

pub(crate) fn support_max(w: &[f64], g: &[f64]) -> f64 {
    w.iter()
        .zip(g)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, &gi)| gi)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn good_stats(mask: &[bool], c: Option<&[f64]>, q: &[f64], g: &[f64]) -> GoodSetStats {
    let n = q.len();
    let (mut good_removed, mut bad_removed) = (0.0, 0.0);
    if let Some(c) = c {
        for (i, &ci) in c.iter().enumerate() {
            let removed = 1.0 / n as f64 - ci;
            if mask[i] {
                good_removed += removed;
            } else {
                bad_removed += removed;
            }
        }
    }
    let (mut good_qg, mut total_qg, mut sum_g, mut sum_abs, mut count) =
        (0.0, 0.0, 0.0, 0.0, 0usize);
    for i in 0..n {
        let qg = q[i] * g[i];
        total_qg += qg;
        if mask[i] {
            good_qg += qg;
            sum_g += g[i];
            sum_abs += g[i].abs();
            count += 1;
        }
    }
    let count = count.max(1) as f64;
    GoodSetStats {
        good_removed: c.map(|_| good_removed),
        bad_removed: c.map(|_| bad_removed),
        good_qg,
        total_qg,
        good_mean_g: sum_g / count,
        good_mean_abs_g: sum_abs / count,
    }
}

pub(crate) struct RecordInput<'a> {
    pub stage: Stage,
    pub eval: &'a ObjectiveEval,
    pub threshold: f64,
    pub stepped: bool,
    pub q: &'a WeightVector,
    pub c: Option<&'a [f64]>,
    pub mask: Option<&'a [bool]>,
    pub keep_vectors: bool,
}

pub(crate) fn push_record(trace: &mut RunTrace, input: RecordInput<'_>) {
    let q = input.q.as_slice();
    let g = &input.eval.g;
    let record = IterationRecord {
        iteration: trace.records.len(),
        stage: input.stage,
        objective: input.eval.value,
        threshold: input.threshold,
        stepped: input.stepped,
        g_max: support_max(q, g),
        g_mean: q.iter().zip(g).map(|(a, b)| a * b).sum(),
        direction: input.eval.direction.iter().copied().collect(),
        good: input.mask.map(|m| good_stats(m, input.c, q, g)),
        weights: input.keep_vectors.then(|| q.to_vec()),
        c: input.c.filter(|_| input.keep_vectors).map(<[f64]>::to_vec),
        g: input.keep_vectors.then(|| g.clone()),
    };
    trace.records.push(record);
}

pub(crate) fn estimate_for(
    task: Task,
    data: &WeightedDataset,
    q: &WeightVector,
) -> Result<Estimate> {
    Ok(match task {
        Task::MeanBoundedCov | Task::MeanIdentityCov => Estimate::Mean {
            mean: moments_of(data.points(), q.as_slice())
                .mean
                .iter()
                .copied()
                .collect(),
        },
        Task::Joint => {
            let m = moments_of(data.points(), q.as_slice());
            Estimate::Joint {
                mean: m.mean.iter().copied().collect(),
                cov: rows_of(&m.cov),
            }
        }
        Task::Regression => Estimate::Regression {
            theta: ols_theta(data, q)?.0.iter().copied().collect(),
        },
    })
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) struct Outcome {
    pub q: WeightVector,
    pub value: f64,
    pub hyper: Option<(f64, f64)>,
    pub seed: u64,
}

pub(crate) fn finish(
    data: &WeightedDataset,
    trace: RunTrace,
    out: Outcome,
) -> Result<EstimateReport> {
    let estimate = estimate_for(trace.task, data, &out.q)?;
    Ok(EstimateReport {
        task: trace.task,
        algorithm: trace.algorithm,
        estimate,
        weights: out.q,
        final_objective: out.value,
        threshold: trace.threshold,
        hyper_objective: out.hyper.map(|h| h.0),
        hyper_threshold: out.hyper.map(|h| h.1),
        iterations: trace.steps(),
        stop_reason: trace.stop_reason,
        seed: out.seed,
        warnings: trace.warnings.clone(),
        trace,
    })
}

pub(crate) fn non_termination(data: &WeightedDataset, mut trace: RunTrace, out: Outcome) -> Error {
    trace.stop_reason = super::trace::StopReason::Cap;
    let iterations = trace.steps();
    let kept = trace.clone();
    match finish(data, trace, out) {
        Ok(report) => Error::NonTermination {
            iterations,
            last: Box::new(report),
            trace: Box::new(kept),
        },
        Err(e) => e,
    }
}

/// Stops a low-regret run at approximate stationarity when requested.
pub(crate) fn stationary_stop(
    trace: &mut RunTrace,
    tol: Option<f64>,
    eval: &ObjectiveEval,
    q: &WeightVector,
    epsilon: f64,
) -> Result<bool> {
    let Some(tol) = tol else { return Ok(false) };
    let violation = crate::landscape::first_order_violation(&eval.g, q, epsilon)?;
    let stop = violation <= tol * eval.value.abs();
    if stop {
        trace.stop_reason = StopReason::Stationary;
    }
    Ok(stop)
}
