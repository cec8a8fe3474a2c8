//! Moduli of continuity, checked direction by direction on random discrete
//! distributions.

use proptest::prelude::*;
use quasigrad::{tv_discrete, WeightVector};

/// Points projected on a direction, with two distributions over them.
fn projected_pair() -> impl Strategy<Value = (Vec<f64>, WeightVector, WeightVector)> {
    (2usize..=12).prop_flat_map(|n| {
        (
            prop::collection::vec(-20.0..20.0f64, n),
            weights(n),
            weights(n),
        )
    })
}

fn weights(n: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01..1.0f64], n).prop_map(|mut w| {
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        WeightVector::from_unnormalized(&w).unwrap()
    })
}

fn moment(x: &[f64], q: &WeightVector, k: i32) -> f64 {
    x.iter().zip(q.as_slice()).map(|(v, w)| w * v.powi(k)).sum()
}

fn variance(x: &[f64], q: &WeightVector) -> f64 {
    let m = moment(x, q, 1);
    x.iter()
        .zip(q.as_slice())
        .map(|(v, w)| w * (v - m).powi(2))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn second_moment_modulus((x, p, q) in projected_pair()) {
        let eps = tv_discrete(&p, &q).unwrap();
        prop_assume!(eps < 1.0 - 1e-9);
        let lhs = (moment(&x, &q, 1) - moment(&x, &p, 1)).powi(2);
        let k = 2.0 * eps / (1.0 - eps).powi(2);
        let centered = k * (variance(&x, &p) + variance(&x, &q));
        let raw = k * (moment(&x, &p, 2) + moment(&x, &q, 2));
        prop_assert!(lhs <= centered * (1.0 + 1e-9) + 1e-9);
        prop_assert!(centered <= raw * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn hypercontractive_modulus((x, p, r) in projected_pair(), lambda in 0.0..0.1f64) {
        let mixed: Vec<f64> = p
            .as_slice()
            .iter()
            .zip(r.as_slice())
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        let q = WeightVector::from_unnormalized(&mixed).unwrap();
        let eps = tv_discrete(&p, &q).unwrap();
        let (p2, q2) = (moment(&x, &p, 2), moment(&x, &q, 2));
        prop_assume!(p2 > 1e-9 && q2 > 1e-9);
        let kappa2 = (moment(&x, &p, 4) / (p2 * p2)).max(moment(&x, &q, 4) / (q2 * q2));
        let kappa = kappa2.sqrt();
        let low = 1.0 - eps - kappa * eps.sqrt();
        prop_assume!(low > 0.0);
        let factor = ((1.0 - eps + kappa * eps.sqrt()) / low).powi(2);
        prop_assert!(p2 * p2 <= factor * q2 * q2 * (1.0 + 1e-9));
        prop_assert!(q2 * q2 <= factor * p2 * p2 * (1.0 + 1e-9));
    }

    #[test]
    fn deletion_keeps_hypercontractivity(
        (x, c) in (2usize..=12).prop_flat_map(|n| (
            prop::collection::vec(-20.0..20.0f64, n),
            prop::collection::vec(0.0..=1.0f64, n),
        )),
    ) {
        let s = x.len() as f64;
        let a = x.iter().map(|v| v.powi(4)).sum::<f64>() / s;
        let b = x.iter().map(|v| v * v).sum::<f64>() / s;
        prop_assume!(b > 1e-9);
        let kappa2 = a / (b * b);
        // c_i ≤ 1/|S|; ε is the deleted mass
        let c: Vec<f64> = c.iter().map(|f| f / s).collect();
        let eps = 1.0 - c.iter().sum::<f64>();
        prop_assume!(kappa2 * eps < 1.0 - 1e-9);
        let fourth: f64 = c.iter().zip(&x).map(|(w, v)| w * v.powi(4)).sum();
        let second: f64 = c.iter().zip(&x).map(|(w, v)| w * v * v).sum();
        let bound = kappa2 / (1.0 - kappa2 * eps) * second * second;
        prop_assert!(fourth <= bound * (1.0 + 1e-9) + 1e-12, "{} > {}", fourth, bound);
    }
}
