//! Seeded synthetic scenarios, error metrics against the planted good set, and
//! parameter sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{check_epsilon, moments_of};
use crate::error::{Error, Result};
use crate::geometry::{project_kl_deleted_simplex, pseudo_inverse};
use crate::landscape::{
    build_breakdown_example, build_hyper_counterexample, spectral_norm, HyperDeletion,
};
use crate::objectives::{ols_theta, residuals};
use crate::solvers::{
    mwu_solve_pruned, seeded_rng, solve, Algorithm, EstimateReport, SolverConfig,
};
use crate::{tv_discrete, Task, TaskObjective, WeightVector, WeightedDataset};

/// Shape of the good coordinates for [`Generator::Joint`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KurtosisProfile {
    /// Kurtosis 3.
    #[default]
    Gaussian,
    /// Kurtosis 9/5.
    Uniform,
    /// Kurtosis 6.
    Laplace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `N(mean, cov)`.
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Independent symmetric Pareto coordinates with tail index `moment + 1`,
    /// so moments below `moment + 1` are finite; scaled to variance `scale²`.
    HeavyTail { d: usize, moment: u32, scale: f64 },
    /// `X ~ N(0, I)`, `Y = θᵀX + noise · Z`.
    Regression { theta: Vec<f64>, noise: f64 },
    /// `mean + L z` with `LLᵀ = cov` and standardized `z` of the given profile.
    Joint {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
        profile: KurtosisProfile,
    },
}

impl Generator {
    /// `N(0, scale² I_d)`.
    pub fn isotropic(d: usize, scale: f64) -> Self {
        let cov = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { scale * scale } else { 0.0 })
                    .collect()
            })
            .collect();
        Generator::Gaussian {
            mean: vec![0.0; d],
            cov,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Gaussian { mean, .. } | Generator::Joint { mean, .. } => mean.len(),
            Generator::HeavyTail { d, .. } => *d,
            Generator::Regression { theta, .. } => theta.len(),
        }
    }

    fn center(&self) -> DVector<f64> {
        match self {
            Generator::Gaussian { mean, .. } | Generator::Joint { mean, .. } => {
                DVector::from_column_slice(mean)
            }
            _ => DVector::zeros(self.dim()),
        }
    }
}

/// How far a planted cluster sits from the good mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceLaw {
    Fixed(f64),
    /// `c / √ε`, which keeps the contaminated covariance at a fixed level.
    InvSqrtEpsilon(f64),
}

impl DistanceLaw {
    pub fn at(self, epsilon: f64) -> f64 {
        match self {
            DistanceLaw::Fixed(d) => d,
            DistanceLaw::InvSqrtEpsilon(c) => c / epsilon.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    None,
    /// A Gaussian blob of width `spread` at `distance` along a random direction.
    FarCluster {
        distance: DistanceLaw,
        spread: f64,
    },
    /// Covariates from the good law with negated responses.
    LabelFlip,
    /// Points at `±magnitude` along a random direction, responses negated.
    HeavyDirection {
        magnitude: f64,
    },
    /// The three-atom landscape example; replaces the generated data.
    BreakdownAtoms {
        a: f64,
    },
    /// The hypercontractivity landscape example; replaces the generated data.
    HyperAtoms {
        delta: f64,
        a: f64,
        b: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub generator: Generator,
    pub adversary: Adversary,
    /// Total number of points; `⌊εn⌋` of them are adversarial.
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    /// Good points come first; the good set is attached.
    pub data: WeightedDataset,
    pub bad_count: usize,
    /// The candidate stationary point, for the atom adversaries.
    pub candidate: Option<WeightVector>,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    check_epsilon(spec.epsilon)?;
    match spec.adversary {
        Adversary::BreakdownAtoms { a } => {
            let ex = build_breakdown_example(spec.epsilon, a)?;
            let bad_count = ex.data.n() - ex.good_set.len();
            return Ok(Scenario {
                data: ex.data,
                bad_count,
                candidate: Some(ex.candidate),
            });
        }
        Adversary::HyperAtoms { delta, a, b } => {
            let ex =
                build_hyper_counterexample(spec.epsilon, delta, a, b, HyperDeletion::ZeroAtom)?;
            let bad_count = ex.atoms.data.n() - ex.atoms.good_set.len();
            return Ok(Scenario {
                data: ex.atoms.data,
                bad_count,
                candidate: Some(ex.atoms.candidate),
            });
        }
        _ => {}
    }
    let d = spec.generator.dim();
    if d == 0 || spec.n < 2 {
        return Err(Error::InvalidInput("scenario needs d ≥ 1 and n ≥ 2".into()));
    }
    let bad = if matches!(spec.adversary, Adversary::None) {
        0
    } else {
        (spec.epsilon * spec.n as f64 + 1e-9).floor() as usize
    };
    let good = spec.n - bad;
    let mut rng = seeded_rng(spec.seed);
    let (mut x, mut y) = (Vec::with_capacity(spec.n), Vec::with_capacity(spec.n));
    for _ in 0..good {
        let (xi, yi) = draw_good(&spec.generator, &mut rng)?;
        x.push(xi);
        y.push(yi);
    }
    let theta = match &spec.generator {
        Generator::Regression { theta, .. } => Some(DVector::from_column_slice(theta)),
        _ => None,
    };
    let flip = |xi: &DVector<f64>| theta.as_ref().map(|t| -t.dot(xi));
    match spec.adversary {
        Adversary::None => {}
        Adversary::FarCluster { distance, spread } => {
            let u = random_direction(d, &mut rng);
            let center = spec.generator.center() + u * distance.at(spec.epsilon);
            for _ in 0..bad {
                let xi = &center + gaussian(d, &mut rng) * spread;
                y.push(theta.as_ref().map(|_| 0.0));
                x.push(xi);
            }
        }
        Adversary::LabelFlip => {
            if theta.is_none() {
                return Err(Error::InvalidInput(
                    "label flipping needs the regression generator".into(),
                ));
            }
            for _ in 0..bad {
                let (xi, yi) = draw_good(&spec.generator, &mut rng)?;
                y.push(yi.map(|v| -v));
                x.push(xi);
            }
        }
        Adversary::HeavyDirection { magnitude } => {
            let u = random_direction(d, &mut rng);
            for _ in 0..bad {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let xi = spec.generator.center() + &u * (sign * magnitude);
                y.push(flip(&xi));
                x.push(xi);
            }
        }
        Adversary::BreakdownAtoms { .. } | Adversary::HyperAtoms { .. } => unreachable!(),
    }
    let points = DMatrix::from_fn(x.len(), d, |i, j| x[i][j]);
    let mut data = WeightedDataset::new(points)?.with_good_set((0..good).collect())?;
    if theta.is_some() {
        let ys: Vec<f64> = y.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        data = data.with_responses(DVector::from_vec(ys))?;
    }
    Ok(Scenario {
        data,
        bad_count: bad,
        candidate: None,
    })
}

fn gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = gaussian(d, rng);
        if v.norm() > 1e-8 {
            return v.normalize();
        }
    }
}

fn cholesky_of(cov: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: cov.len(),
        });
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::param("cov", "not positive definite"))
}

fn draw_good<R: Rng + ?Sized>(
    generator: &Generator,
    rng: &mut R,
) -> Result<(DVector<f64>, Option<f64>)> {
    Ok(match generator {
        Generator::Gaussian { mean, cov } => {
            let l = cholesky_of(cov, mean.len())?;
            (
                DVector::from_column_slice(mean) + l * gaussian(mean.len(), rng),
                None,
            )
        }
        Generator::HeavyTail { d, moment, scale } => {
            if *moment < 2 {
                return Err(Error::param(
                    "moment",
                    "heavy tails need at least two finite moments",
                ));
            }
            let alpha = f64::from(*moment) + 1.0;
            let pareto =
                Pareto::new(1.0, alpha).map_err(|e| Error::param("moment", e.to_string()))?;
            let var = 2.0 / ((alpha - 1.0) * (alpha - 2.0));
            let x = DVector::from_fn(*d, |_, _| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * (pareto.sample(rng) - 1.0) * scale / var.sqrt()
            });
            (x, None)
        }
        Generator::Regression { theta, noise } => {
            let x = gaussian(theta.len(), rng);
            let y = DVector::from_column_slice(theta).dot(&x)
                + noise * rng.sample::<f64, _>(StandardNormal);
            (x, Some(y))
        }
        Generator::Joint { mean, cov, profile } => {
            let d = mean.len();
            let l = cholesky_of(cov, d)?;
            let z = DVector::from_fn(d, |_, _| match profile {
                KurtosisProfile::Gaussian => rng.sample(StandardNormal),
                KurtosisProfile::Uniform => (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt(),
                KurtosisProfile::Laplace => {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln() / 2f64.sqrt()
                }
            });
            (DVector::from_column_slice(mean) + l * z, None)
        }
    })
}

/// Errors of an estimate against the planted good set `S`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorMetrics {
    /// `‖μ_q - μ_S‖`.
    pub mean_error: Option<f64>,
    /// `‖Σ_S^{-1/2}(μ_q - μ_S)‖`.
    pub mahalanobis_error: Option<f64>,
    /// `‖I - Σ_S^{-1/2} Σ_q Σ_S^{-1/2}‖`.
    pub cov_relative_error: Option<f64>,
    /// `E_S[(Y - θ_qᵀX)²] - E_S[(Y - θ_Sᵀ X)²]`.
    pub excess_loss: Option<f64>,
    pub tv_to_good: f64,
    /// Set when `Σ_S` or the good normal equations needed a pseudo-inverse.
    pub pseudo_inverse: bool,
}

pub fn error_metrics(data: &WeightedDataset, report: &EstimateReport) -> Result<ErrorMetrics> {
    let good = data
        .good_set()
        .ok_or_else(|| Error::InvalidInput("metrics need the good set".into()))?;
    let p_s = WeightVector::uniform_on(data.n(), good)?;
    let q = &report.weights;
    let mut out = ErrorMetrics {
        tv_to_good: tv_discrete(q, &p_s)?,
        ..Default::default()
    };
    let good_m = moments_of(data.points(), p_s.as_slice());
    let (inv_sqrt, truncated) = inverse_sqrt(&good_m.cov);
    out.pseudo_inverse = truncated;
    match report.task {
        Task::MeanBoundedCov | Task::MeanIdentityCov | Task::Joint => {
            let mu_q = DVector::from_column_slice(report.estimate.location());
            let diff = &mu_q - &good_m.mean;
            out.mean_error = Some(diff.norm());
            out.mahalanobis_error = Some((&inv_sqrt * &diff).norm());
            if report.task == Task::Joint {
                let cov_q = moments_of(data.points(), q.as_slice()).cov;
                let d = data.d();
                let rel = DMatrix::identity(d, d) - &inv_sqrt * cov_q * &inv_sqrt;
                out.cov_relative_error = Some(spectral_norm(&((&rel + rel.transpose()) * 0.5)));
            }
        }
        Task::Regression => {
            let theta_q = DVector::from_column_slice(report.estimate.location());
            let (theta_s, pinv) = ols_theta(data, &p_s)?;
            out.pseudo_inverse |= pinv;
            let loss = |theta: &DVector<f64>| -> Result<f64> {
                let r = residuals(data, theta)?;
                Ok(good.iter().map(|&i| r[i] * r[i]).sum::<f64>() / good.len() as f64)
            };
            out.excess_loss = Some(loss(&theta_q)? - loss(&theta_s)?);
        }
    }
    Ok(out)
}

fn inverse_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let (pinv, truncated) = pseudo_inverse(m);
    let eig = nalgebra::SymmetricEigen::new(pinv);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in 0..eig.eigenvalues.len() {
        let lambda = eig.eigenvalues[k].max(0.0);
        let u = eig.eigenvectors.column(k);
        out += (u * u.transpose()) * lambda.sqrt();
    }
    (out, truncated)
}

/// One cell of a sweep: a scenario and how to solve it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub spec: ScenarioSpec,
    pub objective: TaskObjective,
    pub config: SolverConfig,
    /// Prune with this `α` before the low-regret mean solver.
    #[serde(default)]
    pub prune_alpha: Option<f64>,
    /// Start the low-regret solver next to the scenario's candidate point.
    #[serde(default)]
    pub adversarial_init: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub task: Task,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub seed: u64,
    pub status: String,
    pub iterations: usize,
    pub final_objective: f64,
    pub threshold: f64,
    pub metrics: ErrorMetrics,
}

/// Weight placed on the uniform distribution when starting next to a candidate.
const INIT_MIX: f64 = 1e-6;

pub fn run_cell(cell: &SweepCell) -> Result<(SweepRow, Option<EstimateReport>)> {
    let scenario = generate(&cell.spec)?;
    let mut config = cell.config.clone();
    if cell.adversarial_init {
        let cand = scenario
            .candidate
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("scenario has no candidate point".into()))?;
        let n = cand.len() as f64;
        let mixed: Vec<f64> = cand
            .as_slice()
            .iter()
            .map(|w| (1.0 - INIT_MIX) * w + INIT_MIX / n)
            .collect();
        config.init = Some(project_kl_deleted_simplex(&mixed, cell.objective.epsilon)?);
    }
    let result = match (cell.prune_alpha, cell.objective.task(), config.algorithm) {
        (Some(alpha), Task::MeanBoundedCov, Algorithm::ExplicitLowRegret) => {
            mwu_solve_pruned(&scenario.data, &cell.objective, &config, alpha)
        }
        _ => solve(&scenario.data, &cell.objective, &config),
    };
    let row = |status: String, report: &EstimateReport| -> Result<SweepRow> {
        Ok(SweepRow {
            task: report.task,
            algorithm: config.algorithm,
            epsilon: cell.spec.epsilon,
            seed: cell.spec.seed,
            status,
            iterations: report.iterations,
            final_objective: report.final_objective,
            threshold: report.threshold,
            metrics: error_metrics(&scenario.data, report)?,
        })
    };
    match result {
        Ok(report) => Ok((row("ok".into(), &report)?, Some(report))),
        Err(Error::NonTermination { last, .. }) => {
            Ok((row("non_termination".into(), &last)?, Some(*last)))
        }
        Err(e) => Err(e),
    }
}

/// Runs every cell, on up to `jobs` threads; rows come back in cell order.
pub fn sweep(cells: &[SweepCell], jobs: usize) -> Vec<Result<SweepRow>> {
    let jobs = jobs.max(1).min(cells.len().max(1));
    let mut out: Vec<Option<Result<SweepRow>>> = (0..cells.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = out.chunks_mut(cells.len().div_ceil(jobs).max(1)).collect();
        let mut start = 0;
        for chunk in chunks {
            let offset = start;
            start += chunk.len();
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_cell(&cells[offset + k]).map(|(row, _)| row));
                }
            });
        }
    });
    out.into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

/// Median of `metric` over rows sharing an `ε`, in increasing `ε`.
pub fn median_by_epsilon(
    rows: &[SweepRow],
    metric: impl Fn(&SweepRow) -> Option<f64>,
) -> Vec<(f64, f64)> {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    eps.into_iter()
        .filter_map(|e| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.epsilon == e)
                .filter_map(&metric)
                .collect();
            median(vals).map(|m| (e, m))
        })
        .collect()
}

pub fn median(mut vals: Vec<f64>) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let k = vals.len();
    Some(if k % 2 == 1 {
        vals[k / 2]
    } else {
        0.5 * (vals[k / 2 - 1] + vals[k / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_reproduce() {
        let spec = ScenarioSpec {
            generator: Generator::isotropic(3, 1.0),
            adversary: Adversary::FarCluster {
                distance: DistanceLaw::Fixed(10.0),
                spread: 0.1,
            },
            n: 50,
            epsilon: 0.1,
            seed: 7,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.data.points(), b.data.points());
        assert_eq!(a.bad_count, 5);
        assert_eq!(a.data.good_set().unwrap().len(), 45);
    }

    #[test]
    fn breakdown_matches_landscape() {
        let spec = ScenarioSpec {
            generator: Generator::isotropic(1, 1.0),
            adversary: Adversary::BreakdownAtoms { a: 3.0 },
            n: 0,
            epsilon: 0.25,
            seed: 0,
        };
        let s = generate(&spec).unwrap();
        let ex = build_breakdown_example(0.25, 3.0).unwrap();
        assert_eq!(s.data.points(), ex.data.points());
        assert_eq!(s.candidate.unwrap(), ex.candidate);
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn heavy_tail_has_unit_scale() {
        let spec = ScenarioSpec {
            generator: Generator::HeavyTail {
                d: 1,
                moment: 6,
                scale: 1.0,
            },
            adversary: Adversary::None,
            n: 20000,
            epsilon: 0.0,
            seed: 1,
        };
        let s = generate(&spec).unwrap();
        let var = s.data.points().iter().map(|x| x * x).sum::<f64>() / 20000.0;
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }
}
