use crate::data::{check_epsilon, deletion_cap};
use crate::error::{Error, Result};
use crate::WeightVector;

/// KL projection of a positive vector onto `Δ_{n,ε} = {q ∈ simplex : q_i ≤ 1/((1-ε)n)}`.
///
/// The minimizer has the form `q_i = min(cap, t p_i)`. Entries are visited in
/// decreasing order of `p`; the smallest number `m` of capped entries for which
/// the rescaled remainder fits under the cap gives `t`.
pub fn project_kl_deleted_simplex(p: &[f64], epsilon: f64) -> Result<WeightVector> {
    check_epsilon(epsilon)?;
    let n = p.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    for (index, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeWeight { index, value: v });
        }
        if v == 0.0 {
            return Err(Error::ZeroWeight { index });
        }
    }
    let cap = deletion_cap(n, epsilon);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));

    // suffix[m] = sum of the n - m smallest entries
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + p[order[k]];
    }

    let mut q = vec![0.0; n];
    for m in 0..n {
        let scale = (1.0 - m as f64 * cap).max(0.0) / suffix[m];
        if p[order[m]] * scale <= cap || m == n - 1 {
            for &i in &order[..m] {
                q[i] = cap;
            }
            for &i in &order[m..] {
                q[i] = (p[i] * scale).min(cap);
            }
            break;
        }
    }
    // not renormalized, so capped entries stay exactly at the cap
    Ok(WeightVector::from_normalized(q))
}

/// `c / Σ c`.
pub fn renormalize(c: &[f64]) -> Result<WeightVector> {
    WeightVector::from_unnormalized(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn caps_the_largest_entry() {
        let q = project_kl_deleted_simplex(&[0.7, 0.1, 0.1, 0.1], 0.25).unwrap();
        let expect = [1.0 / 3.0, 2.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0];
        for (a, b) in q.as_slice().iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn three_points_at_one_third() {
        let q = project_kl_deleted_simplex(&[0.6, 0.3, 0.1], 1.0 / 3.0).unwrap();
        let expect = [0.5, 0.375, 0.125];
        for (a, b) in q.as_slice().iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn feasible_input_is_fixed() {
        let p = [0.3, 0.25, 0.25, 0.2];
        let q = project_kl_deleted_simplex(&p, 0.2).unwrap();
        assert_eq!(q.as_slice(), &p);
    }

    #[test]
    fn zero_epsilon_gives_uniform() {
        let q = project_kl_deleted_simplex(&[5.0, 1.0, 0.5], 0.0).unwrap();
        for &v in q.as_slice() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_entry_is_rejected() {
        assert!(matches!(
            project_kl_deleted_simplex(&[0.5, 0.0, 0.5], 0.1),
            Err(Error::ZeroWeight { index: 1 })
        ));
    }

    #[test]
    fn unnormalized_input_is_scale_invariant() {
        let a = project_kl_deleted_simplex(&[7.0, 1.0, 1.0, 1.0], 0.25).unwrap();
        let b = project_kl_deleted_simplex(&[0.7, 0.1, 0.1, 0.1], 0.25).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_relative_eq!(*x, *y, epsilon = 1e-15);
        }
    }
}
