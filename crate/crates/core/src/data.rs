use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights whose sum is within this distance of 1 are accepted and renormalized.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A probability vector over the `n` observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates `w` as a point of the simplex; sums off by at most
    /// [`SIMPLEX_TOLERANCE`] are silently renormalized.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        check_nonnegative(&w)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(w.into_iter().map(|x| x / sum).collect()))
    }

    /// Wraps weights that are already nonnegative and sum to one up to rounding.
    pub(crate) fn from_normalized(w: Vec<f64>) -> Self {
        debug_assert!((w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        Self(w)
    }

    /// `c / Σ c`; fails with [`Error::Collapsed`] when every entry is zero.
    pub fn from_unnormalized(c: &[f64]) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        check_nonnegative(c)?;
        let sum: f64 = c.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Collapsed);
        }
        Ok(Self(c.iter().map(|x| x / sum).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need n > 0");
        Self(vec![1.0 / n as f64; n])
    }

    /// Uniform on `set`, zero elsewhere.
    pub fn uniform_on(n: usize, set: &[usize]) -> Result<Self> {
        let mut c = vec![0.0; n];
        for &i in set {
            if i >= n {
                return Err(Error::InvalidInput(format!(
                    "index {i} out of range for n = {n}"
                )));
            }
            c[i] = 1.0;
        }
        Self::from_unnormalized(&c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// Whether every weight is at most `1/((1-ε)n)` (up to `tol`).
    pub fn is_in_deleted_simplex(&self, epsilon: f64, tol: f64) -> bool {
        let cap = deletion_cap(self.len(), epsilon);
        self.0.iter().all(|&x| x <= cap + tol)
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_nonnegative(w: &[f64]) -> Result<()> {
    match w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        Some(index) => Err(Error::NegativeWeight {
            index,
            value: w[index],
        }),
        None => Ok(()),
    }
}

/// Largest weight allowed in `Δ_{n,ε}`.
pub(crate) fn deletion_cap(n: usize, epsilon: f64) -> f64 {
    1.0 / ((1.0 - epsilon) * n as f64)
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::param(
            "epsilon",
            format!("{epsilon} is outside [0, 1/2)"),
        ));
    }
    Ok(())
}

/// Observations as rows of an `n × d` matrix, with optional responses and an
/// optional ground-truth good set (simulation only).
#[derive(Clone, Debug)]
pub struct WeightedDataset {
    points: DMatrix<f64>,
    responses: Option<DVector<f64>>,
    good_set: Option<Vec<usize>>,
}

impl WeightedDataset {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must be non-empty, got {} x {}",
                points.nrows(),
                points.ncols()
            )));
        }
        if let Some(k) = points.iter().position(|x| !x.is_finite()) {
            let (i, j) = (k % points.nrows(), k / points.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {i}, column {j}"
            )));
        }
        Ok(Self {
            points,
            responses: None,
            good_set: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn with_responses(mut self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite response".into()));
        }
        self.responses = Some(y);
        Ok(self)
    }

    pub fn with_good_set(mut self, mut good: Vec<usize>) -> Result<Self> {
        good.sort_unstable();
        good.dedup();
        if good.is_empty() {
            return Err(Error::InvalidInput("good set is empty".into()));
        }
        if let Some(&i) = good.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidInput(format!("good index {i} out of range")));
        }
        self.good_set = Some(good);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn responses(&self) -> Option<&DVector<f64>> {
        self.responses.as_ref()
    }

    pub fn good_set(&self) -> Option<&[usize]> {
        self.good_set.as_deref()
    }

    /// Boolean membership mask for the good set.
    pub fn good_mask(&self) -> Option<Vec<bool>> {
        self.good_set.as_ref().map(|g| {
            let mut mask = vec![false; self.n()];
            for &i in g {
                mask[i] = true;
            }
            mask
        })
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    /// Keeps the listed rows, remapping the good set to the new indices.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Collapsed);
        }
        let points = self.points.select_rows(rows);
        let responses = self.responses.as_ref().map(|y| y.select_rows(rows));
        let good_set = self.good_mask().map(|mask| {
            rows.iter()
                .enumerate()
                .filter(|(_, &i)| mask[i])
                .map(|(k, _)| k)
                .collect::<Vec<_>>()
        });
        Ok(Self {
            points,
            responses,
            good_set: good_set.filter(|g| !g.is_empty()),
        })
    }

    /// Subtracts `center` from every point.
    pub fn translated(&self, center: &DVector<f64>) -> Self {
        let mut points = self.points.clone();
        for mut row in points.row_iter_mut() {
            row -= center.transpose();
        }
        Self {
            points,
            responses: self.responses.clone(),
            good_set: self.good_set.clone(),
        }
    }

    pub(crate) fn check_weights(&self, q: &WeightVector) -> Result<()> {
        if q.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: q.len(),
            });
        }
        Ok(())
    }
}

/// Weighted mean and covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// `μ_q = Σ q_i X_i` and `Σ_q = Σ q_i (X_i - μ_q)(X_i - μ_q)ᵀ`, computed in two passes.
pub fn weighted_moments(data: &WeightedDataset, q: &WeightVector) -> Result<Moments> {
    data.check_weights(q)?;
    Ok(moments_of(data.points(), q.as_slice()))
}

pub(crate) fn moments_of(points: &DMatrix<f64>, q: &[f64]) -> Moments {
    let qv = DVector::from_column_slice(q);
    let mean = points.tr_mul(&qv);
    let mut centered = points.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut scaled = centered.clone();
    for (mut row, &w) in scaled.row_iter_mut().zip(q) {
        row *= w;
    }
    let cov = centered.tr_mul(&scaled);
    let cov = (&cov + cov.transpose()) * 0.5;
    Moments { mean, cov }
}

/// `TV(q, p) = Σ max(q_i - p_i, 0)`.
pub fn tv_discrete(q: &WeightVector, p: &WeightVector) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: p.len(),
        });
    }
    Ok(q.as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| (a - b).max(0.0))
        .sum())
}

/// `½ Σ |q_i - p_i|`; agrees with [`tv_discrete`] for probability vectors.
pub fn tv_half_l1(q: &WeightVector, p: &WeightVector) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: p.len(),
        });
    }
    Ok(0.5
        * q.as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// `q` conditioned on `set`: `q_i 1{i ∈ set} / q(set)`.
pub fn restrict_to_set(q: &WeightVector, set: &[usize]) -> Result<WeightVector> {
    let mut c = vec![0.0; q.len()];
    for &i in set {
        if i >= q.len() {
            return Err(Error::InvalidInput(format!("index {i} out of range")));
        }
        c[i] = q[i];
    }
    WeightVector::from_unnormalized(&c)
}
