//! Documents written by the subcommands.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use quasigrad::solvers::{EstimateReport, RunTrace};
use quasigrad::{tv_discrete, Task, WeightVector};

use crate::json::f64_or_nan;

pub const SCHEMA_VERSION: u32 = 1;

/// The report written by `estimate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    /// `ok`, or `non_termination` when the iteration cap was hit.
    pub status: String,
    pub task: Task,
    pub epsilon: f64,
    pub algorithm: String,
    /// Every resolved setting, after flags, config file and defaults.
    pub config: Value,
    pub result: ResultSection,
    pub metrics: Metrics,
    pub trace: TraceSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSection {
    pub estimate: Value,
    pub weights: Vec<f64>,
    #[serde(deserialize_with = "f64_or_nan")]
    pub final_objective: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub threshold: f64,
    pub hyper_objective: Option<f64>,
    pub hyper_threshold: Option<f64>,
    pub iterations: usize,
    pub stop_reason: String,
    pub seed: u64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub d: usize,
    /// Points with nonzero weight.
    pub support: usize,
    /// Total variation distance from the uniform weighting.
    pub deleted_mass: f64,
    /// `n · max_i q_i`; at most `1/(1-ε)` for an ε-deletion.
    pub max_weight_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub iteration_cap: usize,
    /// `F(q)` before every iteration, and at the final weights.
    pub objectives: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<Value>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

impl ReportDocument {
    pub(crate) fn new(
        status: &str,
        epsilon: f64,
        config: Value,
        report: &EstimateReport,
        trace: &RunTrace,
        d: usize,
        full_trace: bool,
    ) -> Self {
        let w = &report.weights;
        let n = w.len();
        let deleted_mass = tv_discrete(w, &WeightVector::uniform(n)).unwrap_or(f64::NAN);
        let max_w = w.as_slice().iter().fold(0.0f64, |a, &b| a.max(b));
        Self {
            schema_version: SCHEMA_VERSION,
            status: status.into(),
            task: report.task,
            epsilon,
            algorithm: report.algorithm.into(),
            config,
            result: ResultSection {
                estimate: value(&report.estimate),
                weights: w.as_slice().to_vec(),
                final_objective: report.final_objective,
                threshold: report.threshold,
                hyper_objective: report.hyper_objective,
                hyper_threshold: report.hyper_threshold,
                iterations: report.iterations,
                stop_reason: value(&report.stop_reason)
                    .as_str()
                    .unwrap_or_default()
                    .into(),
                seed: report.seed,
                warnings: report.warnings.clone(),
            },
            metrics: Metrics {
                n,
                d,
                support: w.as_slice().iter().filter(|&&x| x > 0.0).count(),
                deleted_mass,
                max_weight_ratio: n as f64 * max_w,
            },
            trace: TraceSummary {
                iterations: trace.steps(),
                iteration_cap: trace.iteration_cap,
                objectives: trace
                    .objectives()
                    .into_iter()
                    .map(|v| v.is_finite().then_some(v))
                    .collect(),
                records: full_trace.then(|| trace.records.iter().map(value).collect()),
            },
            timing: None,
        }
    }
}

/// The report written by `landscape`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeDocument {
    pub schema_version: u32,
    /// `breakdown`, `hyper`, or `input`.
    pub source: String,
    pub epsilon: f64,
    pub stationary: bool,
    pub config: Value,
    /// Violation, tolerance, objective and direction of the check.
    pub stationarity: Value,
    /// Closed-form quantities of the constructed instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<Value>,
}
