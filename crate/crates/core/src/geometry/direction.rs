use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::linalg::whitening;
use crate::data::moments_of;
use crate::error::{Error, Result};
use crate::{WeightVector, WeightedDataset};

/// Random restarts used by [`quartic_ratio_sup`] unless overridden.
pub const DEFAULT_RESTARTS: usize = 16;

const ASCENT_TOLERANCE: f64 = 1e-10;
const ASCENT_MAX_STEPS: usize = 500;

/// A unit direction and the objective value it attains.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionResult {
    pub direction: DVector<f64>,
    pub value: f64,
    /// `value` divided by an upper bound on the true supremum, when one is
    /// available; `Some(1.0)` for exact solvers.
    pub certified_fraction: Option<f64>,
    pub iterations: usize,
    pub degenerate: bool,
}

/// Whether the quartic ratio is taken about the origin or about `μ_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Centering {
    Uncentered,
    Centered,
}

/// Top eigenvector of `Σ_q` by power iteration, to relative precision `gamma`.
pub fn top_eigendirection<R: Rng + ?Sized>(
    data: &WeightedDataset,
    q: &WeightVector,
    gamma: f64,
    rng: &mut R,
) -> Result<DirectionResult> {
    data.check_weights(q)?;
    let m = moments_of(data.points(), q.as_slice());
    top_eigendirection_of(&m.cov, gamma, rng)
}

/// Power iteration on a symmetric positive semidefinite matrix.
pub fn top_eigendirection_of<R: Rng + ?Sized>(
    m: &DMatrix<f64>,
    gamma: f64,
    rng: &mut R,
) -> Result<DirectionResult> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", format!("{gamma} is outside (0, 1)")));
    }
    let d = m.nrows();
    let trace = m.trace();
    if trace < 1e-14 {
        let mut e1 = DVector::zeros(d);
        e1[0] = 1.0;
        return Ok(DirectionResult {
            direction: e1,
            value: 0.0,
            certified_fraction: Some(1.0),
            iterations: 0,
            degenerate: true,
        });
    }
    let cap = (8.0 * ((d as f64).ln() + 1.0) / gamma).ceil() as usize + 10;
    let mut x = random_unit(d, rng);
    let mut value = x.dot(&(m * &x));
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        let y = m * &x;
        let norm = y.norm();
        if norm == 0.0 {
            x = random_unit(d, rng);
            continue;
        }
        x = y / norm;
        let next = x.dot(&(m * &x));
        let settled = (next - value).abs() <= 1e-13 * next.abs();
        value = next;
        if settled {
            break;
        }
    }
    let upper = spectral_upper_bound(m);
    Ok(DirectionResult {
        direction: canonical_sign(x),
        value,
        certified_fraction: Some((value / upper).min(1.0)),
        iterations,
        degenerate: false,
    })
}

fn spectral_upper_bound(m: &DMatrix<f64>) -> f64 {
    let gershgorin = m
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    m.trace().min(m.norm()).min(gershgorin)
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// Flips `v` so that its first nonzero coordinate is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Rows of `data` shifted by `μ_q` when centered.
fn shifted_points(data: &WeightedDataset, q: &[f64], centering: Centering) -> DMatrix<f64> {
    match centering {
        Centering::Uncentered => data.points().clone(),
        Centering::Centered => {
            let mean = data.points().tr_mul(&DVector::from_column_slice(q));
            let mut z = data.points().clone();
            for mut row in z.row_iter_mut() {
                row -= mean.transpose();
            }
            z
        }
    }
}

fn second_moment(z: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
    let mut scaled = z.clone();
    for (mut row, &w) in scaled.row_iter_mut().zip(q) {
        row *= w;
    }
    let m = z.tr_mul(&scaled);
    (&m + m.transpose()) * 0.5
}

fn check_support(z: &DMatrix<f64>, q: &[f64]) -> Result<()> {
    let mut support = q
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, _)| i);
    let first = support.next().ok_or(Error::Collapsed)?;
    if support.any(|i| z.row(i) != z.row(first)) {
        Ok(())
    } else {
        Err(Error::Degenerate(
            "fewer than two distinct points carry weight".into(),
        ))
    }
}

/// `E_q[(vᵀz)⁴] / E_q[(vᵀz)²]²` at a given direction.
pub(crate) fn quartic_ratio_at(z: &DMatrix<f64>, q: &[f64], v: &DVector<f64>) -> f64 {
    let proj = z * v;
    let (mut m2, mut m4) = (0.0, 0.0);
    for (p, &w) in proj.iter().zip(q) {
        let s = p * p;
        m2 += w * s;
        m4 += w * s * s;
    }
    m4 / (m2 * m2)
}

/// Heuristic `sup_v E_q[(vᵀz)⁴] / E_q[(vᵀz)²]²` with `z = X` or `z = X - μ_q`.
///
/// After whitening by the second moment the ratio becomes `E_q[(uᵀw)⁴]` on the
/// unit sphere, which is convex in `u`; normalized gradient steps therefore
/// never decrease it. Each restart ascends to a fixed point and the best one wins.
/// The starts are the whitened axes followed by `restarts` random directions, so
/// more restarts never give a smaller value.
pub fn quartic_ratio_sup<R: Rng + ?Sized>(
    data: &WeightedDataset,
    q: &WeightVector,
    centering: Centering,
    restarts: usize,
    rng: &mut R,
) -> Result<DirectionResult> {
    data.check_weights(q)?;
    let q = q.as_slice();
    let z = shifted_points(data, q, centering);
    check_support(&z, q)?;
    let w = whitening(&second_moment(&z, q))
        .ok_or_else(|| Error::Degenerate("second moment is numerically zero".into()))?;
    let white = &z * &w;
    let k = white.ncols();

    let mut starts: Vec<DVector<f64>> = (0..k)
        .map(|j| DVector::from_fn(k, |i, _| f64::from(i == j)))
        .collect();
    starts.extend((0..restarts).map(|_| random_unit(k, rng)));

    // compared on the reported scale, so the maximum is exact over the starts
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut steps = 0;
    for start in starts {
        let (_, u, used) = ascend(&white, q, start);
        steps += used;
        let v = canonical_sign((&w * u).normalize());
        let value = quartic_ratio_at(&z, q, &v);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, v));
        }
    }
    let (value, v) = best.expect("at least one start");
    Ok(DirectionResult {
        direction: v,
        value,
        certified_fraction: None,
        iterations: steps,
        degenerate: false,
    })
}

fn ascend(white: &DMatrix<f64>, q: &[f64], mut u: DVector<f64>) -> (f64, DVector<f64>, usize) {
    let mut value = fourth_moment(white, q, &u);
    for step in 1..=ASCENT_MAX_STEPS {
        let proj = white * &u;
        let coef =
            DVector::from_iterator(proj.len(), proj.iter().zip(q).map(|(p, &w)| w * p * p * p));
        let grad = white.tr_mul(&coef);
        let norm = grad.norm();
        if norm == 0.0 {
            return (value, u, step);
        }
        let next_u = grad / norm;
        let next = fourth_moment(white, q, &next_u);
        if next < value {
            return (value, u, step);
        }
        let done = next - value <= ASCENT_TOLERANCE * next;
        u = next_u;
        value = next;
        if done {
            return (value, u, step);
        }
    }
    (value, u, ASCENT_MAX_STEPS)
}

fn fourth_moment(white: &DMatrix<f64>, q: &[f64], u: &DVector<f64>) -> f64 {
    (white * u).iter().zip(q).map(|(p, &w)| w * p.powi(4)).sum()
}

/// Exhaustive angular grid for the quartic ratio, `d ≤ 3`.
///
/// Moments up to order four are accumulated once, so each grid direction costs
/// a fixed number of flops regardless of `n`.
pub fn quartic_ratio_grid(
    data: &WeightedDataset,
    q: &WeightVector,
    centering: Centering,
    resolution: f64,
) -> Result<DirectionResult> {
    data.check_weights(q)?;
    let d = data.d();
    if d > 3 {
        return Err(Error::Unsupported(format!("grid search in dimension {d}")));
    }
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(Error::param(
            "resolution",
            format!("{resolution} is outside (0, 1)"),
        ));
    }
    let qs = q.as_slice();
    let z = shifted_points(data, qs, centering);
    check_support(&z, qs)?;
    let poly = MomentPolynomials::new(&z, qs);

    let mut best = (f64::NEG_INFINITY, [1.0, 0.0, 0.0]);
    let mut visits = 0usize;
    let mut consider = |v: [f64; 3]| {
        visits += 1;
        let r = poly.ratio(&v);
        if r > best.0 {
            best = (r, v);
        }
    };
    match d {
        1 => consider([1.0, 0.0, 0.0]),
        2 => {
            let steps = (std::f64::consts::PI / resolution).ceil() as usize;
            for k in 0..steps {
                let t = k as f64 * resolution;
                consider([t.cos(), t.sin(), 0.0]);
            }
        }
        _ => {
            let polar_steps = (std::f64::consts::FRAC_PI_2 / resolution).ceil() as usize;
            for a in 0..=polar_steps {
                let theta = (a as f64 * resolution).min(std::f64::consts::FRAC_PI_2);
                let (s, c) = theta.sin_cos();
                let dphi = resolution / s.max(resolution);
                let az_steps = (std::f64::consts::TAU / dphi).ceil() as usize;
                for b in 0..az_steps {
                    let phi = b as f64 * dphi;
                    consider([s * phi.cos(), s * phi.sin(), c]);
                }
            }
        }
    }
    let v = canonical_sign(DVector::from_column_slice(&best.1[..d]));
    Ok(DirectionResult {
        direction: v,
        value: best.0,
        certified_fraction: None,
        iterations: visits,
        degenerate: false,
    })
}

struct MomentPolynomials {
    second: Vec<([u8; 3], f64)>,
    fourth: Vec<([u8; 3], f64)>,
}

impl MomentPolynomials {
    fn new(z: &DMatrix<f64>, q: &[f64]) -> Self {
        let d = z.ncols();
        let build = |order: u8| {
            let mut terms = Vec::new();
            for a in 0..=order {
                for b in 0..=order - a {
                    let c = order - a - b;
                    let exps = [a, b, c];
                    if exps.iter().enumerate().any(|(j, &e)| j >= d && e > 0) {
                        continue;
                    }
                    let coef = factorial(order) / (factorial(a) * factorial(b) * factorial(c));
                    let moment: f64 = z
                        .row_iter()
                        .zip(q)
                        .map(|(row, &w)| {
                            let mut m = w;
                            for (j, &e) in exps.iter().enumerate().take(d) {
                                m *= row[j].powi(i32::from(e));
                            }
                            m
                        })
                        .sum();
                    terms.push((exps, coef * moment));
                }
            }
            terms
        };
        Self {
            second: build(2),
            fourth: build(4),
        }
    }

    fn eval(terms: &[([u8; 3], f64)], pow: &[[f64; 5]; 3]) -> f64 {
        terms
            .iter()
            .map(|(e, c)| {
                c * pow[0][usize::from(e[0])]
                    * pow[1][usize::from(e[1])]
                    * pow[2][usize::from(e[2])]
            })
            .sum()
    }

    fn ratio(&self, v: &[f64; 3]) -> f64 {
        let pow = v.map(|x| {
            let x2 = x * x;
            [1.0, x, x2, x2 * x, x2 * x2]
        });
        let m2 = Self::eval(&self.second, &pow);
        Self::eval(&self.fourth, &pow) / (m2 * m2)
    }
}

fn factorial(k: u8) -> f64 {
    (1..=u32::from(k)).map(f64::from).product()
}

/// `sup_v Σ q_i r_i² (vᵀX_i)² / Σ q_i (vᵀX_i)²`, solved exactly by whitening the
/// denominator and taking the top eigenvector.
pub fn generalized_rayleigh_sup(
    data: &WeightedDataset,
    q: &WeightVector,
    r: &[f64],
) -> Result<DirectionResult> {
    data.check_weights(q)?;
    if r.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: r.len(),
        });
    }
    let qs = q.as_slice();
    let x = data.points();
    let b = second_moment(x, qs);
    let qr: Vec<f64> = qs.iter().zip(r).map(|(w, ri)| w * ri * ri).collect();
    let a = second_moment(x, &qr);
    let w = whitening(&b)
        .ok_or_else(|| Error::Degenerate("covariate second moment is numerically zero".into()))?;
    let a_white = w.transpose() * &a * &w;
    let eig = SymmetricEigen::new((&a_white + a_white.transpose()) * 0.5);
    let top = eig.eigenvalues.imax();
    let v = canonical_sign((&w * eig.eigenvectors.column(top)).normalize());
    let value = v.dot(&(&a * &v)) / v.dot(&(&b * &v));
    Ok(DirectionResult {
        direction: v,
        value,
        certified_fraction: Some(1.0),
        iterations: 1,
        degenerate: false,
    })
}
