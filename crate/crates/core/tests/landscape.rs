//! Objective, quasi-gradient and landscape properties.

use nalgebra::{DVector, SymmetricEigen};
use proptest::prelude::*;
use quasigrad::geometry::{project_kl_deleted_simplex, quartic_ratio_grid, Centering};
use quasigrad::landscape::{
    approx_ratio_certificate, build_hyper_counterexample, first_order_violation,
    stationarity_check, HyperDeletion, STATIONARITY_TOLERANCE,
};
use quasigrad::objectives::{
    eval_joint, eval_mean_bounded, eval_mean_identity, eval_regression_hyper,
    eval_regression_noise, quasigradient_condition,
};
use quasigrad::sim::{
    generate, run_cell, Adversary, DistanceLaw, Generator, ScenarioSpec, SweepCell,
};
use quasigrad::solvers::{Algorithm, SolverConfig, StopReason};
use quasigrad::{weighted_moments, TaskObjective, WeightVector, WeightedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset_and_weights(
    max_n: usize,
    d: usize,
) -> impl Strategy<Value = (WeightedDataset, WeightVector)> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), d + 3..=max_n).prop_flat_map(
        |rows| {
            let n = rows.len();
            (
                Just(WeightedDataset::from_rows(&rows).unwrap()),
                prop::collection::vec(0.05..1.0f64, n)
                    .prop_map(|w| WeightVector::from_unnormalized(&w).unwrap()),
            )
        },
    )
}

fn dot(q: &WeightVector, g: &[f64]) -> f64 {
    q.as_slice().iter().zip(g).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quasi_gradients_are_nonnegative_and_consistent(
        (data, q) in dataset_and_weights(20, 3),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = eval_mean_bounded(&data, &q, 0.01, &mut rng).unwrap();
        prop_assert!(mean.g.iter().all(|&g| g >= 0.0));
        prop_assert!((dot(&q, &mean.g) - mean.value).abs() <= 1e-9 * (1.0 + mean.value));

        let shifted = eval_mean_identity(&data, &q, 0.01, true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!((dot(&q, &shifted.g) - (shifted.value - 1.0)).abs() <= 1e-9 * (1.0 + shifted.value));

        let joint = eval_joint(&data, &q, 8, &mut rng).unwrap();
        prop_assert!(joint.g.iter().all(|&g| g >= 0.0));

        let y: Vec<f64> = (0..data.n()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let reg = data.clone().with_responses(DVector::from_vec(y)).unwrap();
        let hyper = eval_regression_hyper(&reg, &q, 8, &mut rng).unwrap();
        let noise = eval_regression_noise(&reg, &q).unwrap();
        prop_assert!(hyper.g.iter().chain(&noise.g).all(|&g| g >= 0.0));
    }
}

/// Vertices of `Δ_{n,ε}`: `m` entries at the cap and one with the remainder.
fn min_over_vertices(g: &[f64], eps: f64) -> f64 {
    let n = g.len();
    let cap = 1.0 / ((1.0 - eps) * n as f64);
    let m = ((1.0 / cap) + 1e-9).floor() as usize;
    let rest = (1.0 - m as f64 * cap).max(0.0);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let base: f64 = (0..n)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| g[i] * cap)
            .sum();
        if rest == 0.0 || m == n {
            best = best.min(base);
            continue;
        }
        for j in (0..n).filter(|&j| mask >> j & 1 == 0) {
            best = best.min(base + rest * g[j]);
        }
    }
    best
}

fn top_g(data: &WeightedDataset, q: &WeightVector) -> Vec<f64> {
    let m = weighted_moments(data, q).unwrap();
    let eig = SymmetricEigen::new(m.cov.clone());
    let v = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
    let shift = v.dot(&m.mean);
    (data.points() * &v)
        .iter()
        .map(|p| (p - shift).powi(2))
        .collect()
}

/// The vertex of `Δ_{n,ε}` minimizing `E_p[g(q)]`.
fn best_response(data: &WeightedDataset, q: &WeightVector, eps: f64) -> WeightVector {
    let g = top_g(data, q);
    let n = g.len();
    let cap = 1.0 / ((1.0 - eps) * n as f64);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
    let mut w = vec![0.0; n];
    let mut left = 1.0f64;
    for i in order {
        w[i] = cap.min(left);
        left -= w[i];
        if left <= 0.0 {
            break;
        }
    }
    WeightVector::from_unnormalized(&w).unwrap()
}

#[test]
fn stationarity_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut agree, mut stationary_seen) = (0, 0);
    for trial in 0..300 {
        let n = rng.random_range(3..=12);
        let d = rng.random_range(1..=3);
        let eps = rng.random_range(0.0..0.45);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let data = WeightedDataset::from_rows(&rows).unwrap();
        let q = match trial % 3 {
            0 => {
                let p: Vec<f64> = (0..n)
                    .map(|_| rng.random_range(-2.0..2.0f64).exp())
                    .collect();
                project_kl_deleted_simplex(&p, eps).unwrap()
            }
            1 => {
                let p: Vec<f64> = (0..n)
                    .map(|_| rng.random_range(-40.0..0.0f64).exp())
                    .collect();
                project_kl_deleted_simplex(&p, eps).unwrap()
            }
            // repeated best responses usually settle on a stationary vertex
            _ => {
                let mut q = WeightVector::uniform(n);
                for _ in 0..20 {
                    q = best_response(&data, &q, eps);
                }
                q
            }
        };
        let m = weighted_moments(&data, &q).unwrap();
        let eig = SymmetricEigen::new(m.cov.clone());
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        if d > 1 && eig.eigenvalues[idx[0]] - eig.eigenvalues[idx[1]] < 1e-6 {
            continue;
        }
        let v = eig.eigenvectors.column(idx[0]).into_owned();
        let shift = v.dot(&m.mean);
        let g: Vec<f64> = (data.points() * &v)
            .iter()
            .map(|p| (p - shift).powi(2))
            .collect();
        let oracle = dot(&q, &g) - min_over_vertices(&g, eps);
        let report = stationarity_check(&data, &q, eps, STATIONARITY_TOLERANCE, 0).unwrap();
        let scale = 1.0 + m.cov.trace();
        assert!(
            (report.violation - oracle).abs() <= 1e-9 * scale,
            "violation {} vs vertex oracle {oracle}",
            report.violation
        );
        assert!(
            (first_order_violation(&g, &q, eps).unwrap() - oracle).abs() <= 1e-9 * scale,
            "closed form disagrees with the vertex oracle"
        );
        if (oracle - report.tolerance).abs() > 1e-9 * scale {
            assert_eq!(report.stationary, oracle <= report.tolerance);
            agree += 1;
            stationary_seen += usize::from(report.stationary);
        }
    }
    assert!(
        agree > 200 && stationary_seen > 10,
        "{agree} {stationary_seen}"
    );
}

#[test]
fn stationary_mean_condition_bounds_the_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut held = 0;
    for _ in 0..400 {
        let n = rng.random_range(6..=12);
        let d = rng.random_range(1..=3);
        let eps = rng.random_range(0.05..0.3);
        let bad = ((eps * n as f64) + 1e-9).floor() as usize;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let spread = if i < n - bad { 1.0 } else { 20.0 };
                (0..d)
                    .map(|_| rng.random_range(-1.0..1.0) * spread)
                    .collect()
            })
            .collect();
        let data = WeightedDataset::from_rows(&rows).unwrap();
        let good: Vec<usize> = (0..n - bad).collect();
        let p_s = WeightVector::uniform_on(n, &good).unwrap();
        let uniform = WeightVector::uniform(n);
        let t = rng.random_range(0.0..1.0);
        let q = WeightVector::from_unnormalized(
            &p_s.as_slice()
                .iter()
                .zip(uniform.as_slice())
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let m = weighted_moments(&data, &q).unwrap();
        let eig = SymmetricEigen::new(m.cov.clone());
        let k = eig.eigenvalues.imax();
        let v = eig.eigenvectors.column(k).into_owned();
        let shift = v.dot(&m.mean);
        let g: Vec<f64> = (data.points() * &v)
            .iter()
            .map(|p| (p - shift).powi(2))
            .collect();
        if quasigradient_condition(&q, &p_s, &g, 0.0, 1e-6)
            .unwrap()
            .holds
        {
            held += 1;
            let good_norm = eig_max(&weighted_moments(&data, &p_s).unwrap().cov);
            let factor = ((1.0 - eps) / (1.0 - 3.0 * eps)).powi(2);
            assert!(eig.eigenvalues[k] <= factor * good_norm + 1e-4);
        }
    }
    assert!(held > 20, "{held}");
}

fn eig_max(m: &nalgebra::DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

fn mixtures(p_s: &WeightVector, n: usize) -> Vec<WeightVector> {
    let u = 1.0 / n as f64;
    [0.0, 0.001, 0.01, 0.05, 0.2, 0.5, 1.0]
        .iter()
        .map(|&t| {
            let w: Vec<f64> = p_s
                .as_slice()
                .iter()
                .map(|a| (1.0 - t) * a + t * u)
                .collect();
            WeightVector::from_unnormalized(&w).unwrap()
        })
        .collect()
}

fn quartic_g(data: &WeightedDataset, q: &WeightVector, centering: Centering) -> (f64, Vec<f64>) {
    let dir = quartic_ratio_grid(data, q, centering, 1e-3).unwrap();
    let shift = match centering {
        Centering::Centered => dir.direction.dot(&weighted_moments(data, q).unwrap().mean),
        Centering::Uncentered => 0.0,
    };
    let g = (data.points() * &dir.direction)
        .iter()
        .map(|p| (p - shift).powi(4))
        .collect();
    (dir.value, g)
}

#[test]
fn regression_quasi_gradient_implications() {
    let (mut f1_held, mut f1_failed, mut f2_held) = (0, 0, 0);
    for seed in 0..4 {
        let eps = 0.002;
        let spec = ScenarioSpec {
            generator: Generator::Regression {
                theta: vec![1.0, -0.5],
                noise: 0.5,
            },
            adversary: Adversary::HeavyDirection { magnitude: 12.0 },
            n: 2000,
            epsilon: eps,
            seed,
        };
        let data = generate(&spec).unwrap().data;
        let p_s = WeightVector::uniform_on(data.n(), data.good_set().unwrap()).unwrap();
        let (kappa2, _) = quartic_g(&data, &p_s, Centering::Uncentered);
        assert!(kappa2.powf(1.5) * eps < 1.0 / 64.0);
        let sigma2 = eval_regression_noise(&data, &p_s).unwrap().value;
        for q in mixtures(&p_s, data.n()) {
            let (f1, g1) = quartic_g(&data, &q, Centering::Uncentered);
            if quasigradient_condition(&q, &p_s, &g1, 0.0, 0.0)
                .unwrap()
                .holds
            {
                f1_held += 1;
                assert!(f1 <= 4.0 * kappa2, "F1 {f1} vs κ² {kappa2}");
            } else {
                f1_failed += 1;
            }
            let noise = eval_regression_noise(&data, &q).unwrap();
            if f1 <= 4.0 * kappa2
                && quasigradient_condition(&q, &p_s, &noise.g, 0.0, 0.0)
                    .unwrap()
                    .holds
            {
                f2_held += 1;
                assert!(
                    noise.value <= 3.0 * sigma2,
                    "F2 {} vs σ² {sigma2}",
                    noise.value
                );
            }
        }
    }
    assert!(f1_held > 0 && f1_failed > 0 && f2_held > 0);
}

#[test]
fn joint_quasi_gradient_implication() {
    let (mut held, mut failed) = (0, 0);
    for seed in 0..4 {
        let eps = 0.0015;
        let spec = ScenarioSpec {
            generator: Generator::Joint {
                mean: vec![0.5, 0.0],
                cov: vec![vec![1.0, 0.3], vec![0.3, 2.0]],
                profile: quasigrad::sim::KurtosisProfile::Gaussian,
            },
            adversary: Adversary::HeavyDirection { magnitude: 25.0 },
            n: 4000,
            epsilon: eps,
            seed,
        };
        let data = generate(&spec).unwrap().data;
        let p_s = WeightVector::uniform_on(data.n(), data.good_set().unwrap()).unwrap();
        let (kappa2, _) = quartic_g(&data, &p_s, Centering::Centered);
        assert!(kappa2 * eps < 1.0 / 200.0);
        for q in mixtures(&p_s, data.n()) {
            let (f, g) = quartic_g(&data, &q, Centering::Centered);
            if quasigradient_condition(&q, &p_s, &g, 0.0, 0.0)
                .unwrap()
                .holds
            {
                held += 1;
                assert!(f <= 7.0 * kappa2, "F {f} vs κ² {kappa2}");
            } else {
                failed += 1;
            }
        }
    }
    assert!(held > 0 && failed > 0);
}

#[test]
fn hyper_counterexample_grows_without_bound() {
    let mut last = 0.0;
    for b in [10.0, 30.0, 100.0, 300.0] {
        let ex = build_hyper_counterexample(0.1, 0.2, 1.0, b, HyperDeletion::ZeroAtom).unwrap();
        assert!(ex.f1_candidate > 2.0 * last);
        assert!(ex.f1_good <= ex.f1_good_analytic * (1.0 + 1e-12));
        last = ex.f1_candidate;
    }
}

#[test]
fn low_regret_runs_satisfy_the_ratio_certificate() {
    for (k, eps) in [0.05, 0.1, 0.15, 0.2, 0.25].into_iter().enumerate() {
        for seed in 0..2u64 {
            let d = 4;
            let spec = ScenarioSpec {
                generator: Generator::isotropic(d, 1.0),
                adversary: Adversary::FarCluster {
                    distance: DistanceLaw::Fixed(1.5 * (d as f64 / eps).sqrt()),
                    spread: 0.3,
                },
                n: 300,
                epsilon: eps,
                seed: seed + 10 * k as u64,
            };
            let cell = SweepCell {
                spec: spec.clone(),
                objective: TaskObjective::mean_bounded_cov(eps, 1.0).with_threshold(0.0),
                config: SolverConfig {
                    algorithm: Algorithm::ExplicitLowRegret,
                    stationarity_tol: Some(5e-2),
                    seed,
                    ..Default::default()
                },
                prune_alpha: Some(0.5),
                adversarial_init: false,
            };
            let (_, report) = run_cell(&cell).unwrap();
            let report = report.unwrap();
            assert_eq!(
                report.stop_reason,
                StopReason::Stationary,
                "ε={eps}, seed {seed}, {} steps",
                report.iterations
            );
            let data = generate(&spec).unwrap().data;
            let cert =
                approx_ratio_certificate(&data, &report.weights, eps, data.good_set().unwrap())
                    .unwrap();
            let factor = ((1.0 - eps) / (1.0 - 3.0 * eps)).powi(2);
            assert!(cert.ratio.unwrap() <= factor + 0.5, "ε={eps}: {cert:?}");
            if let Some(within) = cert.within_bound {
                assert!(within, "ε={eps}: {cert:?}");
            }
        }
    }
}
