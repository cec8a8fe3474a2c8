//! `quasigrad simulate` (alias `bench`).

use std::io::Write;

use serde::Serialize;

use quasigrad::sim::{
    sweep, Adversary, DistanceLaw, Generator, KurtosisProfile, ScenarioSpec, SweepCell, SweepRow,
};
use quasigrad::solvers::SolverConfig;

use crate::args::{layered, AdversaryArg, GeneratorArg, ProfileArg, SimulateArgs, TaskArg};
use crate::estimate::{algorithm, default_algorithm, Model};
use crate::{emit, json_text, resolve_seed, Failure, EXIT_OK};

type Axes = (Option<Vec<f64>>, Option<Vec<usize>>, Option<Vec<usize>>);

/// Parses `eps=...;n=...;d=...`; a missing axis takes its single-valued flag.
pub(crate) fn parse_grid(text: &str) -> Result<Axes, Failure> {
    let (mut eps, mut n, mut d) = (None, None, None);
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| Failure::input(format!("--grid: `{part}` is not key=values")))?;
        let bad = |v: &str| Failure::input(format!("--grid: `{v}` is not a valid {key} value"));
        let items = values.split(',').map(str::trim);
        match key.trim() {
            "eps" | "epsilon" => {
                eps = Some(
                    items
                        .map(|v| v.parse::<f64>().map_err(|_| bad(v)))
                        .collect::<Result<_, _>>()?,
                )
            }
            "n" => {
                n = Some(
                    items
                        .map(|v| v.parse::<usize>().map_err(|_| bad(v)))
                        .collect::<Result<_, _>>()?,
                )
            }
            "d" => {
                d = Some(
                    items
                        .map(|v| v.parse::<usize>().map_err(|_| bad(v)))
                        .collect::<Result<_, _>>()?,
                )
            }
            other => {
                return Err(Failure::input(format!(
                    "--grid: unknown key `{other}`; expected eps, n or d"
                )))
            }
        }
    }
    Ok((eps, n, d))
}

#[derive(Serialize)]
struct CsvRow {
    task: String,
    epsilon: f64,
    n: usize,
    d: usize,
    seed: u64,
    algorithm: String,
    status: String,
    iterations: Option<usize>,
    final_objective: Option<f64>,
    threshold: Option<f64>,
    mean_error: Option<f64>,
    mahalanobis_error: Option<f64>,
    cov_relative_error: Option<f64>,
    excess_loss: Option<f64>,
    tv_to_good: Option<f64>,
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

impl CsvRow {
    fn new(cell: &SweepCell, row: &Result<SweepRow, quasigrad::Error>) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        let mut out = CsvRow {
            task: label(&cell.objective.task()),
            epsilon: cell.spec.epsilon,
            n: cell.spec.n,
            d: cell.spec.generator.dim(),
            seed: cell.spec.seed,
            algorithm: label(&cell.config.algorithm),
            status: String::new(),
            iterations: None,
            final_objective: None,
            threshold: None,
            mean_error: None,
            mahalanobis_error: None,
            cov_relative_error: None,
            excess_loss: None,
            tv_to_good: None,
        };
        match row {
            Ok(r) => {
                out.status = r.status.clone();
                out.iterations = Some(r.iterations);
                out.final_objective = finite(r.final_objective);
                out.threshold = finite(r.threshold);
                out.mean_error = r.metrics.mean_error;
                out.mahalanobis_error = r.metrics.mahalanobis_error;
                out.cov_relative_error = r.metrics.cov_relative_error;
                out.excess_loss = r.metrics.excess_loss;
                out.tv_to_good = finite(r.metrics.tv_to_good);
            }
            Err(e) => out.status = format!("error: {e}"),
        }
        out
    }
}

#[derive(Serialize)]
struct CellReport<'a> {
    cell: &'a SweepCell,
    #[serde(skip_serializing_if = "Option::is_none")]
    row: Option<&'a SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn scaled_identity(d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { scale * scale } else { 0.0 })
                .collect()
        })
        .collect()
}

fn kurtosis(p: ProfileArg) -> f64 {
    match p {
        ProfileArg::Gaussian => 3.0,
        ProfileArg::Uniform => 1.8,
        ProfileArg::Laplace => 6.0,
    }
}

pub(crate) fn cells(s: &SimulateArgs) -> Result<Vec<SweepCell>, Failure> {
    let task = s.task.unwrap_or(TaskArg::Mean);
    let (grid_eps, grid_n, grid_d) = match &s.grid {
        Some(g) => parse_grid(g)?,
        None => (None, None, None),
    };
    let eps = match (grid_eps, s.epsilon) {
        (Some(e), _) => e,
        (None, Some(e)) => vec![e],
        (None, None) => {
            return Err(Failure::missing(
                "--epsilon",
                "give --epsilon or an eps axis in --grid",
            ))
        }
    };
    let atoms = matches!(
        s.adversary,
        Some(AdversaryArg::Breakdown | AdversaryArg::Hyper)
    );
    // atom instances fix their own size, so n and d are reported as 0 and 1
    let (ns, ds) = if atoms {
        (vec![0], vec![1])
    } else {
        (
            grid_n.unwrap_or_else(|| vec![s.n.unwrap_or(1000)]),
            grid_d.unwrap_or_else(|| vec![s.d.unwrap_or(5)]),
        )
    };
    let base_seed = resolve_seed(s.seed);
    let seeds = s.seeds.unwrap_or(1);
    if seeds == 0 {
        return Err(Failure::input("invalid --seeds: must be at least 1"));
    }

    let scale = s.scale.unwrap_or(1.0);
    let noise = s.noise.unwrap_or(1.0);
    let profile = s.profile.unwrap_or(ProfileArg::Gaussian);
    let adversary_kind = s.adversary.unwrap_or(match task {
        TaskArg::Mean | TaskArg::Identity => AdversaryArg::FarCluster,
        TaskArg::Regression => AdversaryArg::LabelFlip,
        TaskArg::Joint => AdversaryArg::HeavyDirection,
    });
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| Failure::missing(flag, "the adversary needs it"))
    };
    let model = Model {
        task,
        sigma: s.sigma.or(Some(match task {
            TaskArg::Regression => noise,
            _ => scale,
        })),
        kappa: s.kappa.or(Some(kurtosis(profile).max(3.0).sqrt())),
        tau: s.tau,
        rho: s.rho,
        beta: s.beta,
        gamma: s.gamma,
        c1: s.c1,
        xi: s.xi,
    };
    let defaults = SolverConfig::default();

    let mut out = Vec::new();
    for &epsilon in &eps {
        let objective = model.objective(epsilon)?;
        for &n in &ns {
            for &d in &ds {
                let generator = match task {
                    TaskArg::Mean | TaskArg::Identity => {
                        match s.generator.unwrap_or(GeneratorArg::Gaussian) {
                            GeneratorArg::Gaussian => Generator::isotropic(d, scale),
                            GeneratorArg::HeavyTail => Generator::HeavyTail {
                                d,
                                moment: s.moment.unwrap_or(4),
                                scale,
                            },
                        }
                    }
                    TaskArg::Regression => Generator::Regression {
                        theta: vec![s.theta.unwrap_or(1.0); d],
                        noise,
                    },
                    TaskArg::Joint => Generator::Joint {
                        mean: vec![0.0; d],
                        cov: scaled_identity(d, scale),
                        profile: match profile {
                            ProfileArg::Gaussian => KurtosisProfile::Gaussian,
                            ProfileArg::Uniform => KurtosisProfile::Uniform,
                            ProfileArg::Laplace => KurtosisProfile::Laplace,
                        },
                    },
                };
                let adversary = match adversary_kind {
                    AdversaryArg::None => Adversary::None,
                    AdversaryArg::FarCluster => Adversary::FarCluster {
                        distance: match s.distance_scale {
                            Some(c) => DistanceLaw::InvSqrtEpsilon(c * scale),
                            None => DistanceLaw::Fixed(
                                s.distance.unwrap_or(10.0 * scale * (d as f64).sqrt()),
                            ),
                        },
                        spread: s.spread.unwrap_or(scale),
                    },
                    AdversaryArg::LabelFlip => Adversary::LabelFlip,
                    AdversaryArg::HeavyDirection => Adversary::HeavyDirection {
                        magnitude: s.magnitude.unwrap_or(10.0 * scale),
                    },
                    AdversaryArg::Breakdown => Adversary::BreakdownAtoms {
                        a: need(s.a, "--a")?,
                    },
                    AdversaryArg::Hyper => Adversary::HyperAtoms {
                        delta: need(s.delta, "--delta")?,
                        a: need(s.a, "--a")?,
                        b: need(s.b, "--b")?,
                    },
                };
                for seed in base_seed..base_seed + seeds {
                    out.push(SweepCell {
                        spec: ScenarioSpec {
                            generator: generator.clone(),
                            adversary: adversary.clone(),
                            n,
                            epsilon,
                            seed,
                        },
                        objective: objective.clone(),
                        config: SolverConfig {
                            algorithm: algorithm(s.algorithm.unwrap_or(default_algorithm(task))),
                            eta: s.eta.unwrap_or(defaults.eta),
                            gamma: s.gamma.unwrap_or(defaults.gamma),
                            max_iters: s.max_iters,
                            seed,
                            stationarity_tol: s.stationarity_tol,
                            ..defaults.clone()
                        },
                        prune_alpha: s.prune_alpha,
                        adversarial_init: s.adversarial_init.unwrap_or(false),
                    });
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn run(flags: &SimulateArgs, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let s = layered(flags, flags.config.as_deref())?;
    let cells = cells(&s)?;
    let rows = sweep(&cells, s.jobs.unwrap_or(1));

    let mut wtr = csv::Writer::from_writer(Vec::new());
    for (cell, row) in cells.iter().zip(&rows) {
        wtr.serialize(CsvRow::new(cell, row))
            .map_err(|e| Failure::input(format!("csv: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Failure::input(format!("csv: {e}")))?;
    let table = String::from_utf8(bytes).expect("csv writes UTF-8");

    if let Some(dir) = &s.reports {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        for (k, (cell, row)) in cells.iter().zip(&rows).enumerate() {
            let doc = CellReport {
                cell,
                row: row.as_ref().ok(),
                error: row.as_ref().err().map(|e| e.to_string()),
            };
            let path = dir.join(format!("cell-{k:04}.json"));
            emit(&json_text(&doc), Some(&path), stdout)?;
        }
    }
    emit(&table, s.output.as_deref(), stdout)?;
    Ok(EXIT_OK)
}
