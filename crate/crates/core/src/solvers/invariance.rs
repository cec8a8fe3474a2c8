use serde::Serialize;

use super::trace::RunTrace;
use crate::error::{Error, Result};

/// Invariant checks at one trace record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub iteration: usize,
    /// `Σ_{i∈S} (1/n - c_i)`.
    pub good_removed: f64,
    /// `Σ_{i∉S} (1/n - c_i)`.
    pub bad_removed: f64,
    /// Good mass removed so far does not exceed bad mass removed.
    pub removal_balanced: bool,
    /// For records followed by a step: `Σ_{i∈S} q_i g_i ≤ ½ Σ_i q_i g_i`.
    pub good_share_bounded: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub checks: Vec<InvarianceCheck>,
    pub all_hold: bool,
}

/// Checks the filter invariants against the good set `S`.
///
/// Uses the full weight and gradient vectors when the trace kept them and the
/// ledger otherwise. `tol` absorbs rounding in the comparisons.
pub fn invariance_monitor(
    trace: &RunTrace,
    good_set: &[usize],
    tol: f64,
) -> Result<InvarianceReport> {
    let n = trace.n;
    let mut mask = vec![false; n];
    for &i in good_set {
        if i >= n {
            return Err(Error::InvalidInput(format!("good index {i} out of range")));
        }
        mask[i] = true;
    }
    let mut checks = Vec::with_capacity(trace.records.len());
    for rec in &trace.records {
        let (good_removed, bad_removed, good_qg, total_qg) = match (&rec.c, &rec.weights, &rec.g) {
            (Some(c), Some(q), Some(g)) => {
                let (mut gr, mut br, mut gq, mut tq) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    let removed = 1.0 / n as f64 - c[i];
                    let qg = q[i] * g[i];
                    tq += qg;
                    if mask[i] {
                        gr += removed;
                        gq += qg;
                    } else {
                        br += removed;
                    }
                }
                (gr, br, gq, tq)
            }
            _ => {
                let stats = rec.good.as_ref().ok_or(Error::MissingTraceField("c"))?;
                let gr = stats
                    .good_removed
                    .ok_or(Error::MissingTraceField("good_removed"))?;
                let br = stats
                    .bad_removed
                    .ok_or(Error::MissingTraceField("bad_removed"))?;
                (gr, br, stats.good_qg, stats.total_qg)
            }
        };
        checks.push(InvarianceCheck {
            iteration: rec.iteration,
            good_removed,
            bad_removed,
            removal_balanced: good_removed <= bad_removed + tol,
            good_share_bounded: rec.stepped.then_some(good_qg <= 0.5 * total_qg + tol),
        });
    }
    let all_hold = checks
        .iter()
        .all(|c| c.removal_balanced && c.good_share_bounded.unwrap_or(true));
    Ok(InvarianceReport { checks, all_hold })
}
