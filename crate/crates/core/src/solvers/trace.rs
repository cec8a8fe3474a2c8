use serde::Serialize;

use crate::objectives::Task;
use crate::WeightVector;

/// Which objective a trace record refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Mean,
    Hyper,
    Noise,
    Joint,
}

/// Quantities that need the ground-truth good set `S`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodSetStats {
    /// `Σ_{i∈S} (1/n - c_i)`, filter only.
    pub good_removed: Option<f64>,
    /// `Σ_{i∉S} (1/n - c_i)`, filter only.
    pub bad_removed: Option<f64>,
    /// `Σ_{i∈S} q_i g_i`.
    pub good_qg: f64,
    /// `Σ_i q_i g_i`.
    pub total_qg: f64,
    /// `E_{p_S}[g]`.
    pub good_mean_g: f64,
    /// `E_{p_S}[|g|]`.
    pub good_mean_abs_g: f64,
}

/// One evaluation of the objective, followed by a step unless it was final.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub stage: Stage,
    pub objective: f64,
    pub threshold: f64,
    pub stepped: bool,
    pub g_max: f64,
    /// `Σ q_i g_i`.
    pub g_mean: f64,
    pub direction: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub good: Option<GoodSetStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The objective reached its threshold.
    #[default]
    Threshold,
    /// The iterate was first-order stationary to the requested tolerance.
    Stationary,
    /// The iteration cap was hit.
    Cap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    pub task: Task,
    pub algorithm: &'static str,
    pub n: usize,
    pub epsilon: f64,
    pub threshold: f64,
    /// Bound `B` on `|g|` used for the low-regret step size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    pub iteration_cap: usize,
    pub stop_reason: StopReason,
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

impl RunTrace {
    pub(crate) fn new(
        task: Task,
        algorithm: &'static str,
        n: usize,
        epsilon: f64,
        threshold: f64,
        cap: usize,
    ) -> Self {
        Self {
            task,
            algorithm,
            n,
            epsilon,
            threshold,
            step_bound: None,
            step_size: None,
            iteration_cap: cap,
            stop_reason: StopReason::Threshold,
            records: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.records.iter().filter(|r| r.stepped).count()
    }

    /// Objective values in evaluation order.
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Mean { mean: Vec<f64> },
    Regression { theta: Vec<f64> },
    Joint { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

impl Estimate {
    /// The mean, or the regression coefficients.
    pub fn location(&self) -> &[f64] {
        match self {
            Estimate::Mean { mean } | Estimate::Joint { mean, .. } => mean,
            Estimate::Regression { theta } => theta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub task: Task,
    pub algorithm: &'static str,
    pub estimate: Estimate,
    pub weights: WeightVector,
    pub final_objective: f64,
    pub threshold: f64,
    /// Covariate hypercontractivity and its threshold, for regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyper_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyper_threshold: Option<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub seed: u64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub trace: RunTrace,
}
