//! Browser bindings for three small `quasigrad` demos. Every export returns a
//! JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use quasigrad::geometry::project_kl_deleted_simplex;
use quasigrad::landscape::{
    breakdown_critical_a, build_breakdown_example, stationarity_check, STATIONARITY_TOLERANCE,
};
use quasigrad::sim::{generate, Adversary, DistanceLaw, Generator, ScenarioSpec};
use quasigrad::solvers::{filter_solve, SolverConfig};
use quasigrad::{weighted_moments, TaskObjective, WeightVector};

#[derive(Debug, Serialize)]
pub struct BreakdownPoint {
    pub a: f64,
    pub stationary: bool,
    pub violation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
pub struct BreakdownScan {
    pub epsilon: f64,
    /// `None` when the candidate is stationary for every `a`.
    pub critical_a: Option<f64>,
    pub points: Vec<BreakdownPoint>,
}

/// Stationarity of the delete-the-atom-at-`-1` candidate for `steps` values of
/// `a` evenly spaced in `[1, a_max]`.
pub fn breakdown_scan(epsilon: f64, a_max: f64, steps: usize) -> quasigrad::Result<BreakdownScan> {
    let steps = steps.max(2);
    let mut points = Vec::with_capacity(steps);
    for k in 0..steps {
        let a = 1.0 + (a_max - 1.0) * k as f64 / (steps - 1) as f64;
        let ex = build_breakdown_example(epsilon, a)?;
        let r = stationarity_check(&ex.data, &ex.candidate, epsilon, STATIONARITY_TOLERANCE, 0)?;
        points.push(BreakdownPoint {
            a,
            stationary: r.stationary,
            violation: r.violation,
            tolerance: r.tolerance,
        });
    }
    let critical = breakdown_critical_a(epsilon);
    Ok(BreakdownScan {
        epsilon,
        critical_a: critical.is_finite().then_some(critical),
        points,
    })
}

#[derive(Debug, Serialize)]
pub struct FilterRun {
    pub points: Vec<[f64; 2]>,
    pub good: Vec<bool>,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub objectives: Vec<f64>,
    pub threshold: f64,
    pub filtered_mean: [f64; 2],
    pub sample_mean: [f64; 2],
    pub good_mean: [f64; 2],
}

fn pair(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

/// Filters `N(0, I₂)` data with an `ε` fraction planted `distance` away.
pub fn filter_run(
    n: usize,
    epsilon: f64,
    distance: f64,
    seed: u64,
) -> quasigrad::Result<FilterRun> {
    let scenario = generate(&ScenarioSpec {
        generator: Generator::isotropic(2, 1.0),
        adversary: Adversary::FarCluster {
            distance: DistanceLaw::Fixed(distance),
            spread: 0.5,
        },
        n,
        epsilon,
        seed,
    })?;
    let data = &scenario.data;
    let cfg = SolverConfig {
        seed,
        ..Default::default()
    };
    let report = filter_solve(data, &TaskObjective::mean_bounded_cov(epsilon, 1.0), &cfg)?;
    let good_set = data.good_set().unwrap_or(&[]);
    let mut good = vec![false; data.n()];
    for &i in good_set {
        good[i] = true;
    }
    let sample = weighted_moments(data, &WeightVector::uniform(data.n()))?.mean;
    let good_mean = weighted_moments(data, &WeightVector::uniform_on(data.n(), good_set)?)?.mean;
    Ok(FilterRun {
        points: (0..data.n())
            .map(|i| pair(data.row(i).as_slice()))
            .collect(),
        good,
        weights: report.weights.as_slice().to_vec(),
        iterations: report.iterations,
        objectives: report.trace.objectives(),
        threshold: report.threshold,
        filtered_mean: pair(report.estimate.location()),
        sample_mean: pair(sample.as_slice()),
        good_mean: pair(good_mean.as_slice()),
    })
}

#[derive(Debug, Serialize)]
pub struct Projection {
    pub input: Vec<f64>,
    pub projected: Vec<f64>,
    pub cap: f64,
    pub kl: f64,
}

/// KL projection of the normalized `weights` onto the `ε`-deleted simplex.
pub fn kl_project(weights: &[f64], epsilon: f64) -> quasigrad::Result<Projection> {
    let p = WeightVector::from_unnormalized(weights)?;
    let q = project_kl_deleted_simplex(p.as_slice(), epsilon)?;
    let kl = q
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * (qi / pi).ln())
        .sum();
    Ok(Projection {
        input: p.into_inner(),
        projected: q.as_slice().to_vec(),
        cap: 1.0 / ((1.0 - epsilon) * weights.len() as f64),
        kl,
    })
}

fn to_js<T: Serialize>(r: quasigrad::Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn breakdown_landscape(epsilon: f64, a_max: f64, steps: usize) -> Result<String, JsError> {
    to_js(breakdown_scan(epsilon, a_max, steps))
}

#[wasm_bindgen]
pub fn filter_demo(n: usize, epsilon: f64, distance: f64, seed: u32) -> Result<String, JsError> {
    to_js(filter_run(n, epsilon, distance, u64::from(seed)))
}

#[wasm_bindgen]
pub fn kl_projection(weights: Vec<f64>, epsilon: f64) -> Result<String, JsError> {
    to_js(kl_project(&weights, epsilon))
}
