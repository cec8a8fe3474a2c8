//! First-order stationarity of the objectives over `Δ_{n,ε}`, and the two
//! one-dimensional constructions that probe it.
//!
//! A point `q` is stationary for an objective with gradient `∇F(q)` when
//! `max_{p ∈ Δ_{n,ε}} ⟨∇F(q), q - p⟩ ≤ 0`. The inner minimum of `⟨∇F, p⟩` puts
//! the largest allowed mass on the smallest gradient entries, so the check is a
//! partial sort.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{check_epsilon, deletion_cap, moments_of};
use crate::error::{Error, Result};
use crate::geometry::{quartic_ratio_sup, Centering};
use crate::{WeightVector, WeightedDataset};

/// Default relative tolerance; scaled by `tr(Σ_q)` for the mean objective.
pub const STATIONARITY_TOLERANCE: f64 = 1e-8;

/// Constants in the approximation-ratio bound for stationary points.
pub const RATIO_BOUND_C1: f64 = 12.0;
pub const RATIO_BOUND_C2: f64 = 12.0;

const RANDOM_EIGENSPACE_DIRECTIONS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub stationary: bool,
    /// `max_p ⟨∇F(q), q - p⟩`, minimized over candidate directions.
    pub violation: f64,
    /// Absolute tolerance the violation was compared against.
    pub tolerance: f64,
    pub objective: f64,
    pub direction: Vec<f64>,
    /// Numerical multiplicity of the top eigenvalue (mean objective only).
    pub multiplicity: usize,
    /// Smallest `(α, β)` with `α = 0` such that the quasi-gradient condition
    /// holds against every `p ∈ Δ_{n,ε}`.
    pub alpha: f64,
    pub beta: f64,
}

/// `E_q[g] - min_{p ∈ Δ_{n,ε}} E_p[g]`.
pub fn first_order_violation(g: &[f64], q: &WeightVector, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let n = q.len();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.len(),
        });
    }
    let cap = deletion_cap(n, epsilon);
    let full = (((1.0 - epsilon) * n as f64) + 1e-9).floor().min(n as f64) as usize;
    let remainder = (1.0 - full as f64 * cap).max(0.0);
    let mut sorted = g.to_vec();
    let low = if full < n {
        let (smaller, kth, _) = sorted.select_nth_unstable_by(full, f64::total_cmp);
        smaller.iter().sum::<f64>() * cap + remainder * *kth
    } else {
        sorted.iter().sum::<f64>() * cap
    };
    let expected: f64 = q.as_slice().iter().zip(g).map(|(a, b)| a * b).sum();
    Ok(expected - low)
}

fn check_feasible(q: &WeightVector, epsilon: f64) -> Result<()> {
    if !q.is_in_deleted_simplex(epsilon, 1e-12) {
        return Err(Error::InvalidInput(format!(
            "weights are not in the deletion set for ε = {epsilon}"
        )));
    }
    Ok(())
}

/// Stationarity of `q ↦ ‖Σ_q‖` with `g_i = (vᵀ(X_i - μ_q))²` for a top
/// eigenvector `v`. When the top eigenvalue is repeated, the eigenbasis and 32
/// random unit vectors of the eigenspace are tried and the best is kept.
pub fn stationarity_check(
    data: &WeightedDataset,
    q: &WeightVector,
    epsilon: f64,
    tol: f64,
    seed: u64,
) -> Result<StationarityReport> {
    data.check_weights(q)?;
    check_feasible(q, epsilon)?;
    let m = moments_of(data.points(), q.as_slice());
    let tolerance = tol * m.cov.trace().max(0.0);
    let eig = SymmetricEigen::new(m.cov.clone());
    let top = eig.eigenvalues.max();
    let space: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] >= top - 1e-8 * top.abs())
        .collect();
    let basis: Vec<DVector<f64>> = space
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();

    let mut candidates = basis.clone();
    if basis.len() > 1 {
        let mut rng = crate::solvers::seeded_rng(seed);
        for _ in 0..RANDOM_EIGENSPACE_DIRECTIONS {
            let mut v = DVector::zeros(data.d());
            for b in &basis {
                v += b * rng.sample::<f64, _>(StandardNormal);
            }
            candidates.push(v.normalize());
        }
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    for v in candidates {
        let shift = v.dot(&m.mean);
        let g: Vec<f64> = (data.points() * &v)
            .iter()
            .map(|p| (p - shift).powi(2))
            .collect();
        let violation = first_order_violation(&g, q, epsilon)?;
        if best.as_ref().is_none_or(|(b, _)| violation < *b) {
            best = Some((violation, v));
        }
    }
    let (violation, v) = best.expect("eigenspace is nonempty");
    Ok(StationarityReport {
        stationary: violation <= tolerance,
        violation,
        tolerance,
        objective: top,
        direction: crate::geometry::canonical_sign(v).iter().copied().collect(),
        multiplicity: basis.len(),
        alpha: 0.0,
        beta: violation.max(0.0),
    })
}

/// Stationarity of the covariate hypercontractivity `F1(q)` along its
/// maximizing direction `v`, using
/// `∂F1/∂q_i = (vᵀX_i)⁴ / m₂² - 2 m₄ (vᵀX_i)² / m₂³`.
/// The tolerance is `tol · max_i |∂F1/∂q_i|`.
pub fn hyper_kkt_check(
    data: &WeightedDataset,
    q: &WeightVector,
    epsilon: f64,
    tol: f64,
    seed: u64,
) -> Result<StationarityReport> {
    data.check_weights(q)?;
    check_feasible(q, epsilon)?;
    let v = if data.d() == 1 {
        DVector::from_element(1, 1.0)
    } else {
        let mut rng = crate::solvers::seeded_rng(seed);
        quartic_ratio_sup(
            data,
            q,
            Centering::Uncentered,
            4 * crate::geometry::DEFAULT_RESTARTS,
            &mut rng,
        )?
        .direction
    };
    let proj = data.points() * &v;
    let (mut m2, mut m4) = (0.0, 0.0);
    for (p, &w) in proj.iter().zip(q.as_slice()) {
        m2 += w * p * p;
        m4 += w * p.powi(4);
    }
    if m2 <= 0.0 {
        return Err(Error::Degenerate("second moment is zero".into()));
    }
    let grad: Vec<f64> = proj
        .iter()
        .map(|p| p.powi(4) / (m2 * m2) - 2.0 * m4 * p * p / m2.powi(3))
        .collect();
    let scale = grad.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let violation = first_order_violation(&grad, q, epsilon)?;
    let tolerance = tol * scale;
    Ok(StationarityReport {
        stationary: violation <= tolerance,
        violation,
        tolerance,
        objective: m4 / (m2 * m2),
        direction: v.iter().copied().collect(),
        multiplicity: 1,
        alpha: 0.0,
        beta: violation.max(0.0),
    })
}

/// `√(2ε / ((1-ε)² n)) · ‖∂F‖`: the additive slack implied by a small gradient.
pub fn beta_from_gradient_norm(epsilon: f64, n: usize, gradient_norm: f64) -> f64 {
    (2.0 * epsilon / ((1.0 - epsilon).powi(2) * n as f64)).sqrt() * gradient_norm
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioCertificate {
    pub sigma_q: f64,
    pub sigma_good: f64,
    /// `‖Σ_q‖ / ‖Σ_{p_S}‖`, absent when the good covariance vanishes.
    pub ratio: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `(1 + C₁(α+ε)/(1-(3+α)ε)²)‖Σ_{p_S}‖ + C₂β/(1-(3+α)ε)²`.
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
}

/// Compares `‖Σ_q‖` with the good covariance and with the bound implied by
/// the stationarity slack of `q`.
pub fn approx_ratio_certificate(
    data: &WeightedDataset,
    q: &WeightVector,
    epsilon: f64,
    good_set: &[usize],
) -> Result<RatioCertificate> {
    let st = stationarity_check(data, q, epsilon, STATIONARITY_TOLERANCE, 0)?;
    let p_s = WeightVector::uniform_on(data.n(), good_set)?;
    let sigma_good = spectral_norm(&moments_of(data.points(), p_s.as_slice()).cov);
    let sigma_q = spectral_norm(&moments_of(data.points(), q.as_slice()).cov);
    let ratio = (sigma_good > 0.0).then(|| sigma_q / sigma_good);
    let base = 1.0 - (3.0 + st.alpha) * epsilon;
    let bound = (base > 0.0).then(|| {
        (1.0 + RATIO_BOUND_C1 * (st.alpha + epsilon) / (base * base)) * sigma_good
            + RATIO_BOUND_C2 * st.beta / (base * base)
    });
    Ok(RatioCertificate {
        sigma_q,
        sigma_good,
        ratio,
        alpha: st.alpha,
        beta: st.beta,
        bound,
        within_bound: bound.map(|b| sigma_q <= b * (1.0 + 1e-12)),
    })
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()))
}

/// One-dimensional atoms realized as `n` equally weighted points.
#[derive(Clone, Debug)]
pub struct AtomExample {
    pub data: WeightedDataset,
    /// The candidate point whose stationarity is in question.
    pub candidate: WeightVector,
    pub good_set: Vec<usize>,
    pub epsilon: f64,
}

/// Mass `ε` at `-1`, `1-2ε` at `0` and `ε` at `a`; good set `{-1, 0}`; the
/// candidate deletes the atom at `-1`.
///
/// For `ε < 1/3` the candidate is stationary exactly when
/// `a ≤ (1-ε)/(1-3ε)`; for `ε ≥ 1/3` it is stationary for every `a`.
pub fn build_breakdown_example(epsilon: f64, a: f64) -> Result<AtomExample> {
    check_epsilon(epsilon)?;
    if epsilon <= 0.0 {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("{a} must be positive")));
    }
    let n = common_denominator(&[epsilon, 1.0 - 2.0 * epsilon])?;
    let k = (epsilon * n as f64).round() as usize;
    let mut xs = vec![-1.0; k];
    xs.extend(std::iter::repeat_n(0.0, n - 2 * k));
    xs.extend(std::iter::repeat_n(a, k));
    let data = line(&xs)?;
    let candidate = WeightVector::uniform_on(n, &(k..n).collect::<Vec<_>>())?;
    Ok(AtomExample {
        data: data.with_good_set((0..n - k).collect())?,
        candidate,
        good_set: (0..n - k).collect(),
        epsilon,
    })
}

/// The value of `a` at which the breakdown candidate stops being stationary.
pub fn breakdown_critical_a(epsilon: f64) -> f64 {
    if epsilon >= 1.0 / 3.0 {
        f64::INFINITY
    } else {
        (1.0 - epsilon) / (1.0 - 3.0 * epsilon)
    }
}

/// Where the `ε` deleted mass is taken from in the hypercontractivity example.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperDeletion {
    /// Delete from the atom at `0`, with `γ = δa²/b²`. The candidate is stationary.
    #[default]
    ZeroAtom,
    /// Delete from the atom at `a`, with `γ = (δ-ε)a²/b²`. Kept for comparison:
    /// moving mass back onto `a` lowers `F1`, so this candidate is not stationary.
    LargeAtom,
}

#[derive(Clone, Debug)]
pub struct HyperExample {
    pub atoms: AtomExample,
    pub deletion: HyperDeletion,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    /// `F1` at the candidate, from the realized points.
    pub f1_candidate: f64,
    /// Closed form of the same quantity.
    pub f1_candidate_analytic: f64,
    /// `F1` of the good set, from the realized points.
    pub f1_good: f64,
    /// `(1-γ)/δ` for [`HyperDeletion::ZeroAtom`].
    pub f1_good_analytic: f64,
}

/// Atoms at `0`, `a` and `b` with masses `1-δ-γ`, `δ`, `γ`; the good set drops
/// the atom at `b`, and the candidate deletes `ε` mass as set by `deletion`.
pub fn build_hyper_counterexample(
    epsilon: f64,
    delta: f64,
    a: f64,
    b: f64,
    deletion: HyperDeletion,
) -> Result<HyperExample> {
    check_epsilon(epsilon)?;
    if epsilon <= 0.0 {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::param("b", "need 0 < a < b"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} is outside (0, 1)")));
    }
    let gamma = match deletion {
        HyperDeletion::ZeroAtom => delta * a * a / (b * b),
        HyperDeletion::LargeAtom => {
            if delta <= epsilon {
                return Err(Error::param(
                    "delta",
                    "must exceed ε when deleting from the atom at a",
                ));
            }
            (delta - epsilon) * a * a / (b * b)
        }
    };
    if gamma > epsilon {
        return Err(Error::param(
            "b",
            format!("γ = {gamma} exceeds ε; increase b"),
        ));
    }
    let zero_mass = 1.0 - delta - gamma;
    if deletion == HyperDeletion::ZeroAtom && zero_mass < epsilon {
        return Err(Error::param("delta", "the atom at 0 has less than ε mass"));
    }
    let n = common_denominator(&[delta, gamma, epsilon])?;
    let count = |m: f64| (m * n as f64).round() as usize;
    let (n_a, n_b, n_del) = (count(delta), count(gamma), count(epsilon));
    let n_zero = n - n_a - n_b;
    let mut xs = vec![0.0; n_zero];
    xs.extend(std::iter::repeat_n(a, n_a));
    xs.extend(std::iter::repeat_n(b, n_b));
    let deleted: std::ops::Range<usize> = match deletion {
        HyperDeletion::ZeroAtom => 0..n_del,
        HyperDeletion::LargeAtom => n_zero..n_zero + n_del,
    };
    let kept: Vec<usize> = (0..n).filter(|i| !deleted.contains(i)).collect();
    let candidate = WeightVector::uniform_on(n, &kept)?;
    let good_set: Vec<usize> = (0..n_zero + n_a).collect();
    let data = line(&xs)?.with_good_set(good_set.clone())?;

    let f1 = |w: &WeightVector| -> f64 {
        let (mut m2, mut m4) = (0.0, 0.0);
        for (x, &wi) in xs.iter().zip(w.as_slice()) {
            m2 += wi * x * x;
            m4 += wi * x.powi(4);
        }
        m4 / (m2 * m2)
    };
    let f1_candidate = f1(&candidate);
    let f1_good = f1(&WeightVector::uniform_on(n, &good_set)?);
    let remaining_a = match deletion {
        HyperDeletion::ZeroAtom => delta,
        HyperDeletion::LargeAtom => delta - epsilon,
    };
    let (m2, m4) = (
        remaining_a * a * a + gamma * b * b,
        remaining_a * a.powi(4) + gamma * b.powi(4),
    );
    let f1_candidate_analytic = (1.0 - epsilon) * m4 / (m2 * m2);
    Ok(HyperExample {
        atoms: AtomExample {
            data,
            candidate,
            good_set,
            epsilon,
        },
        deletion,
        delta,
        a,
        b,
        gamma,
        f1_candidate,
        f1_candidate_analytic,
        f1_good,
        f1_good_analytic: (1.0 - gamma) / delta,
    })
}

fn line(xs: &[f64]) -> Result<WeightedDataset> {
    WeightedDataset::new(DMatrix::from_column_slice(xs.len(), 1, xs))
}

const MAX_REALIZED_POINTS: usize = 20_000_000;

/// Smallest `n` for which every mass times `n` is (numerically) an integer.
pub fn common_denominator(masses: &[f64]) -> Result<usize> {
    let mut n = 1usize;
    for &m in masses {
        let den = rational_denominator(m)
            .ok_or_else(|| Error::InvalidInput(format!("mass {m} has no small rational form")))?;
        n = lcm(n, den);
        if n > MAX_REALIZED_POINTS {
            return Err(Error::InvalidInput(format!(
                "realizing the atoms needs more than {MAX_REALIZED_POINTS} points"
            )));
        }
    }
    Ok(n)
}

/// Denominator of the first continued-fraction convergent within `1e-9` relative error.
fn rational_denominator(x: f64) -> Option<usize> {
    let tol = 1e-9 * x.abs().max(1e-300);
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_REALIZED_POINTS as f64 {
            return None;
        }
        if (h2 / k2 - x).abs() <= tol {
            return Some(k2 as usize);
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac == 0.0 {
            return Some(k2 as usize);
        }
        r = 1.0 / frac;
    }
    None
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn denominators() {
        assert_eq!(common_denominator(&[0.25, 0.5]).unwrap(), 4);
        assert_eq!(common_denominator(&[1.0 / 3.0, 1.0 / 3.0]).unwrap(), 3);
        assert_eq!(common_denominator(&[0.2, 2e-7, 0.1]).unwrap(), 5_000_000);
        assert!(common_denominator(&[1.0 / 3e7]).is_err());
    }

    #[test]
    fn breakdown_atoms() {
        let ex = build_breakdown_example(0.25, 3.0).unwrap();
        let xs: Vec<f64> = ex.data.points().iter().copied().collect();
        assert_eq!(xs, vec![-1.0, 0.0, 0.0, 3.0]);
        assert_eq!(
            ex.candidate.as_slice(),
            &[0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn breakdown_ratio_at_boundary() {
        let ex = build_breakdown_example(0.2, 2.0).unwrap();
        let st =
            stationarity_check(&ex.data, &ex.candidate, 0.2, STATIONARITY_TOLERANCE, 0).unwrap();
        assert!(st.stationary);
        let cert = approx_ratio_certificate(&ex.data, &ex.candidate, 0.2, &ex.good_set).unwrap();
        assert_relative_eq!(cert.ratio.unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(cert.within_bound, Some(true));
    }

    #[test]
    fn violation_closed_form() {
        let q = WeightVector::uniform(4);
        let v = first_order_violation(&[1.0, 2.0, 3.0, 10.0], &q, 0.25).unwrap();
        assert_relative_eq!(v, 4.0 - 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hyper_small_instance() {
        let ex = build_hyper_counterexample(0.1, 0.2, 1.0, 10.0, HyperDeletion::ZeroAtom).unwrap();
        assert_relative_eq!(ex.gamma, 0.002, epsilon = 1e-15);
        assert_relative_eq!(
            ex.f1_candidate,
            ex.f1_candidate_analytic,
            max_relative = 1e-12
        );
        assert_relative_eq!(ex.f1_candidate, 0.9 * 101.0 / 0.8, max_relative = 1e-12);
        assert_relative_eq!(ex.f1_good, ex.f1_good_analytic, max_relative = 1e-12);
        let st = hyper_kkt_check(
            &ex.atoms.data,
            &ex.atoms.candidate,
            0.1,
            STATIONARITY_TOLERANCE,
            0,
        )
        .unwrap();
        assert!(st.stationary, "{st:?}");
    }

    #[test]
    fn hyper_large_atom_deletion_is_not_stationary() {
        let ex = build_hyper_counterexample(0.1, 0.2, 1.0, 10.0, HyperDeletion::LargeAtom).unwrap();
        assert_relative_eq!(ex.gamma, 0.001, epsilon = 1e-15);
        let st = hyper_kkt_check(
            &ex.atoms.data,
            &ex.atoms.candidate,
            0.1,
            STATIONARITY_TOLERANCE,
            0,
        )
        .unwrap();
        assert!(!st.stationary);
        assert!(st.violation > 0.0);
    }

    #[test]
    fn gradient_slack() {
        assert_relative_eq!(
            beta_from_gradient_norm(0.5, 8, 1.0),
            (1.0f64 / 2.0).sqrt(),
            epsilon = 1e-15
        );
    }
}
