//! Property tests for the projection and the direction oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use quasigrad::geometry::{
    generalized_rayleigh_sup, project_kl_deleted_simplex, quartic_ratio_grid, quartic_ratio_sup,
    top_eigendirection, Centering,
};
use quasigrad::{tv_discrete, tv_half_l1, weighted_moments, WeightVector, WeightedDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kl(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * (qi / pi).ln())
        .sum()
}

fn positive_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0..6.0f64, 1..=max_len)
        .prop_map(|v| v.into_iter().map(f64::exp).collect())
}

fn dataset(max_n: usize, d: usize) -> impl Strategy<Value = WeightedDataset> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), d + 2..=max_n)
        .prop_map(|rows| WeightedDataset::from_rows(&rows).unwrap())
}

fn weights_for(n: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.05..1.0f64, n)
        .prop_map(|w| WeightVector::from_unnormalized(&w).unwrap())
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_feasible_and_beats_feasible_probes(
        raw in positive_vec(20),
        eps in 0.0..0.49f64,
        probes in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 20), 200),
    ) {
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let q = project_kl_deleted_simplex(&p, eps).unwrap();
        let cap = 1.0 / ((1.0 - eps) * p.len() as f64);
        prop_assert!(q.as_slice().iter().all(|&w| w >= 0.0 && w <= cap));
        let best = kl(q.as_slice(), &p);
        for probe in &probes {
            let v: Vec<f64> = probe[..p.len()].iter().map(|x| x.exp()).collect();
            let feasible = project_kl_deleted_simplex(&v, eps).unwrap();
            prop_assert!(best <= kl(feasible.as_slice(), &p) + 1e-12);
        }
    }

    #[test]
    fn projection_preserves_order(raw in positive_vec(20), eps in 0.0..0.49f64) {
        let q = project_kl_deleted_simplex(&raw, eps).unwrap();
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                if raw[i] >= raw[j] {
                    prop_assert!(q[i] >= q[j]);
                }
            }
        }
    }

    #[test]
    fn tv_formulas_agree(a in positive_vec(15), b in positive_vec(15)) {
        let n = a.len().min(b.len());
        let p = WeightVector::from_unnormalized(&a[..n]).unwrap();
        let q = WeightVector::from_unnormalized(&b[..n]).unwrap();
        let (x, y) = (tv_discrete(&p, &q).unwrap(), tv_half_l1(&p, &q).unwrap());
        prop_assert!((x - y).abs() <= 1e-12);
    }

    #[test]
    fn power_iteration_reaches_one_minus_gamma(
        (data, q) in dataset(30, 6).prop_flat_map(|d| { let n = d.n(); (Just(d), weights_for(n)) }),
        gamma in 0.01..0.3f64,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let found = top_eigendirection(&data, &q, gamma, &mut rng).unwrap();
        let exact = spectral(&weighted_moments(&data, &q).unwrap().cov);
        prop_assert!(found.value >= (1.0 - gamma) * exact - 1e-12);
        prop_assert!(found.value <= exact * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn quartic_restarts_only_help(
        (data, q) in dataset(25, 4).prop_flat_map(|d| { let n = d.n(); (Just(d), weights_for(n)) }),
        seed in 0u64..1000,
        restarts in 2usize..20,
    ) {
        for centering in [Centering::Centered, Centering::Uncentered] {
            let one = quartic_ratio_sup(&data, &q, centering, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let many = quartic_ratio_sup(&data, &q, centering, restarts, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(many.value >= one.value);
        }
    }

    #[test]
    fn rayleigh_scales_quadratically(
        (data, q, r) in dataset(25, 4).prop_flat_map(|d| {
            let n = d.n();
            (Just(d), weights_for(n), prop::collection::vec(-3.0..3.0f64, n))
        }),
        c in 0.1..10.0f64,
    ) {
        let base = generalized_rayleigh_sup(&data, &q, &r).unwrap().value;
        let scaled: Vec<f64> = r.iter().map(|x| x * c).collect();
        let value = generalized_rayleigh_sup(&data, &q, &scaled).unwrap().value;
        prop_assert!((value - c * c * base).abs() <= 1e-9 * (1.0 + c * c * base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn quartic_ascent_matches_the_grid(
        (data, q) in dataset(25, 3).prop_flat_map(|d| { let n = d.n(); (Just(d), weights_for(n)) }),
        seed in 0u64..1000,
    ) {
        for centering in [Centering::Centered, Centering::Uncentered] {
            let grid = quartic_ratio_grid(&data, &q, centering, 2e-3).unwrap().value;
            let sup = quartic_ratio_sup(&data, &q, centering, 16, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().value;
            // the grid is a lower bound of the true sup, up to its resolution
            prop_assert!(sup >= grid * (1.0 - 1e-3), "sup {} grid {}", sup, grid);
            prop_assert!(sup <= grid * (1.0 + 1e-2), "sup {} grid {}", sup, grid);
        }
    }
}

#[test]
fn degenerate_covariance_returns_the_first_axis() {
    let data = WeightedDataset::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
    let q = WeightVector::uniform(2);
    let res = top_eigendirection(&data, &q, 0.1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(res.degenerate);
    assert_eq!(res.direction, DVector::from_vec(vec![1.0, 0.0]));
}
