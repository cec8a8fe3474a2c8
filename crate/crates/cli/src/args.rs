//! Command-line arguments. Each subcommand's arguments double as the schema of
//! its `--config` file; flags override file values.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "quasigrad",
    version,
    about = "Robust estimation by generalized quasi-gradient descent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Estimate from a CSV file and print a JSON report.
    Estimate(EstimateArgs),
    /// Run seeded simulations over a grid and print a CSV table.
    #[command(visible_alias = "bench")]
    Simulate(SimulateArgs),
    /// Check first-order stationarity of a weighting.
    Landscape(LandscapeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    /// Mean under bounded covariance.
    Mean,
    /// Mean under near-identity covariance.
    Identity,
    /// Linear regression with hypercontractive covariates.
    Regression,
    /// Joint mean and covariance.
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmArg {
    Filter,
    Mwu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorArg {
    Gaussian,
    HeavyTail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileArg {
    Gaussian,
    Uniform,
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryArg {
    None,
    FarCluster,
    LabelFlip,
    HeavyDirection,
    Breakdown,
    Hyper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleArg {
    Breakdown,
    Hyper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeletionArg {
    ZeroAtom,
    LargeAtom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    /// Largest eigenvalue of the weighted covariance.
    Covariance,
    /// Hypercontractivity ratio `E[(vᵀX)⁴] / E[(vᵀX)²]²`.
    Hyper,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateArgs {
    /// CSV of observations, one point per row; for regression the last column is the response.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Fraction of corrupted points, in [0, 1/2).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Covariance bound σ (mean), or noise level σ (regression).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Hypercontractivity constant κ (regression, joint).
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Relative precision of the top-eigenvector search.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Constant in the identity-covariance threshold.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Objective threshold ξ, overriding the default (regression: σ'²).
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    /// Step parameter of the low-regret solver.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Prune with this α before the low-regret mean solver.
    #[arg(long)]
    pub prune_alpha: Option<f64>,
    /// Stop the low-regret solvers at approximate stationarity.
    #[arg(long)]
    pub stationarity_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Seed; falls back to QUASIGRAD_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Include every iteration record in the report.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub trace: Option<bool>,
    /// Skip the first input row.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub header: Option<bool>,
    /// Add wall-clock timing to the report.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub timing: Option<bool>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON file with default values for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Grid of cells, e.g. "eps=0.05,0.1,0.2;n=1000,2000;d=5".
    #[arg(long)]
    pub grid: Option<String>,
    /// Contamination level when the grid has no `eps` key.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of seeds per cell, counting up from --seed.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; rows are identical for any value.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorArg>,
    /// Standard deviation of each coordinate of the good points.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Finite moment order of the heavy-tailed generator.
    #[arg(long)]
    pub moment: Option<u32>,
    /// Every coordinate of the true regression vector.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Regression noise level.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Coordinate law of the joint-estimation generator.
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    #[arg(long, value_enum)]
    pub adversary: Option<AdversaryArg>,
    /// Cluster distance from the good mean.
    #[arg(long)]
    pub distance: Option<f64>,
    /// Cluster distance c/√ε instead of a fixed distance.
    #[arg(long, conflicts_with = "distance")]
    pub distance_scale: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub prune_alpha: Option<f64>,
    #[arg(long)]
    pub stationarity_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Start the low-regret solver next to the adversary's candidate point.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub adversarial_init: Option<bool>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write one JSON file per cell into this directory.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeArgs {
    /// A constructed instance; otherwise pass --input and --weights.
    #[arg(long, value_enum)]
    pub example: Option<ExampleArg>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// One weight per row, or all weights in one row.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Where the hyper example deletes its ε mass.
    #[arg(long, value_enum)]
    pub deletion: Option<DeletionArg>,
    /// Relative tolerance of the stationarity test.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub header: Option<bool>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fills every option not given on the command line from the JSON file at `config`.
pub(crate) fn layered<T: Serialize + DeserializeOwned + Clone>(
    flags: &T,
    config: Option<&Path>,
) -> Result<T, Failure> {
    let Some(path) = config else {
        return Ok(flags.clone());
    };
    let err = |e: &dyn std::fmt::Display| Failure::input(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| err(&e))?;
    let mut base: Value = serde_json::from_str(&text).map_err(|e| err(&e))?;
    T::deserialize(&base).map_err(|e| err(&e))?;
    let fields = base
        .as_object_mut()
        .ok_or_else(|| err(&"expected a JSON object"))?;
    let Value::Object(top) = serde_json::to_value(flags).expect("arguments serialize") else {
        unreachable!("arguments serialize to an object")
    };
    for (key, value) in top {
        if !value.is_null() {
            fields.insert(key, value);
        }
    }
    T::deserialize(&base).map_err(|e| err(&e))
}
