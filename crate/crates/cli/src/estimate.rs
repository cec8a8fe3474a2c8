//! `quasigrad estimate`.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use quasigrad::objectives::IdentityParams;
use quasigrad::solvers::{self, mwu_solve_pruned, Algorithm, SolverConfig};
use quasigrad::{Error, Task, TaskObjective, WeightedDataset};

use crate::args::{layered, AlgorithmArg, EstimateArgs, TaskArg};
use crate::input::read_csv_file;
use crate::report::{ReportDocument, Timing};
use crate::{emit, json_text, resolve_seed, Failure, EXIT_NON_TERMINATION, EXIT_OK};

/// Model options shared by `estimate` and `simulate`.
pub(crate) struct Model {
    pub task: TaskArg,
    pub sigma: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub c1: Option<f64>,
    pub xi: Option<f64>,
}

impl Model {
    pub fn objective(&self, epsilon: f64) -> Result<TaskObjective, Failure> {
        let sigma = || {
            self.sigma
                .ok_or_else(|| Failure::missing("--sigma", "the task needs a variance bound σ"))
        };
        let kappa = || {
            self.kappa.ok_or_else(|| {
                Failure::missing("--kappa", "the task needs a hypercontractivity constant κ")
            })
        };
        let obj = match self.task {
            TaskArg::Mean => TaskObjective::mean_bounded_cov(epsilon, sigma()?.powi(2)),
            TaskArg::Identity => {
                let d = IdentityParams::default();
                TaskObjective::mean_identity_cov(
                    epsilon,
                    IdentityParams {
                        tau: self.tau.unwrap_or(d.tau),
                        rho: self.rho.unwrap_or(d.rho),
                        beta: self.beta.unwrap_or(d.beta),
                        gamma: self.gamma.unwrap_or(d.gamma),
                        c1: self.c1.unwrap_or(d.c1),
                    },
                )
            }
            TaskArg::Regression => {
                TaskObjective::regression(epsilon, kappa()?.powi(2), sigma()?.powi(2))
            }
            TaskArg::Joint => TaskObjective::joint(epsilon, kappa()?.powi(2)),
        };
        let obj = match self.xi {
            Some(xi) => obj.with_threshold(xi),
            None => obj,
        };
        obj.validate()?;
        Ok(obj)
    }
}

pub(crate) fn default_algorithm(task: TaskArg) -> AlgorithmArg {
    match task {
        TaskArg::Identity => AlgorithmArg::Mwu,
        _ => AlgorithmArg::Filter,
    }
}

pub(crate) fn algorithm(a: AlgorithmArg) -> Algorithm {
    match a {
        AlgorithmArg::Filter => Algorithm::Filter,
        AlgorithmArg::Mwu => Algorithm::ExplicitLowRegret,
    }
}

/// Runs the matching solver, pruning first when `prune_alpha` is set.
pub(crate) fn solve(
    data: &WeightedDataset,
    objective: &TaskObjective,
    cfg: &SolverConfig,
    prune_alpha: Option<f64>,
) -> quasigrad::Result<solvers::EstimateReport> {
    match prune_alpha {
        Some(alpha) => {
            if objective.task() != Task::MeanBoundedCov
                || cfg.algorithm != Algorithm::ExplicitLowRegret
            {
                return Err(Error::Unsupported(
                    "--prune-alpha outside the mean task with --algorithm mwu".into(),
                ));
            }
            mwu_solve_pruned(data, objective, cfg, alpha)
        }
        None => solvers::solve(data, objective, cfg),
    }
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    input: &'a str,
    header: bool,
    objective: &'a TaskObjective,
    solver: &'a SolverConfig,
    prune_alpha: Option<f64>,
}

pub(crate) fn run(flags: &EstimateArgs, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let s = layered(flags, flags.config.as_deref())?;
    let input = s
        .input
        .as_ref()
        .ok_or_else(|| Failure::missing("input", "pass the path of a CSV file"))?;
    let epsilon = s
        .epsilon
        .ok_or_else(|| Failure::missing("--epsilon", "the corruption fraction is required"))?;
    let task = s.task.unwrap_or(TaskArg::Mean);
    let objective = Model {
        task,
        sigma: s.sigma,
        kappa: s.kappa,
        tau: s.tau,
        rho: s.rho,
        beta: s.beta,
        gamma: s.gamma,
        c1: s.c1,
        xi: s.xi,
    }
    .objective(epsilon)?;
    let defaults = SolverConfig::default();
    let cfg = SolverConfig {
        algorithm: algorithm(s.algorithm.unwrap_or(default_algorithm(task))),
        eta: s.eta.unwrap_or(defaults.eta),
        gamma: s.gamma.unwrap_or(defaults.gamma),
        max_iters: s.max_iters,
        seed: resolve_seed(s.seed),
        record_weights: false,
        stationarity_tol: s.stationarity_tol,
        ..defaults
    };

    let header = s.header.unwrap_or(false);
    let rows = read_csv_file(input, header)?;
    let data = dataset(rows, task)?;

    let start = Instant::now();
    let (status, code, report, trace) = match solve(&data, &objective, &cfg, s.prune_alpha) {
        Ok(r) => {
            let trace = r.trace.clone();
            ("ok", EXIT_OK, r, trace)
        }
        Err(Error::NonTermination { last, trace, .. }) => {
            ("non_termination", EXIT_NON_TERMINATION, *last, *trace)
        }
        Err(e) => return Err(e.into()),
    };
    let seconds = start.elapsed().as_secs_f64();

    let config = serde_json::to_value(EffectiveConfig {
        input: &input.to_string_lossy(),
        header,
        objective: &objective,
        solver: &cfg,
        prune_alpha: s.prune_alpha,
    })
    .expect("config serializes");
    let mut doc = ReportDocument::new(
        status,
        epsilon,
        config,
        &report,
        &trace,
        data.d(),
        s.trace.unwrap_or(false),
    );
    if s.timing.unwrap_or(false) {
        doc.timing = Some(Timing { seconds });
    }
    emit(&json_text(&doc), s.output.as_deref(), stdout)?;
    Ok(code)
}

fn dataset(rows: Vec<Vec<f64>>, task: TaskArg) -> Result<WeightedDataset, Failure> {
    if task != TaskArg::Regression {
        return Ok(WeightedDataset::from_rows(&rows)?);
    }
    if rows[0].len() < 2 {
        return Err(Failure::input(
            "regression input needs at least one covariate column and a response column",
        ));
    }
    let mut x = rows;
    let y: Vec<f64> = x
        .iter_mut()
        .map(|r| r.pop().expect("row is nonempty"))
        .collect();
    Ok(WeightedDataset::from_rows(&x)?.with_responses(DVector::from_vec(y))?)
}
