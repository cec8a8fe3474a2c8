use nalgebra::DVector;
use serde::Serialize;

use crate::data::check_epsilon;
use crate::error::{Error, Result};
use crate::WeightedDataset;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PruneResult {
    /// Indices of the surviving points, ascending.
    pub kept: Vec<usize>,
    /// Coordinatewise mean of the survivors.
    pub center: Vec<f64>,
    pub radius: f64,
}

impl PruneResult {
    pub fn center_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.center)
    }
}

/// Keeps point `i` when at least `n/2` points (itself included) lie within
/// `2σ√(d/(αε))` of it.
pub fn naive_prune(
    data: &WeightedDataset,
    sigma: f64,
    epsilon: f64,
    alpha: f64,
) -> Result<PruneResult> {
    check_epsilon(epsilon)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("{sigma} must be positive")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
    }
    let (n, d) = (data.n(), data.d());
    let radius = 2.0 * sigma * (d as f64 / (alpha * epsilon)).sqrt();
    let kept: Vec<usize> = if radius.is_finite() {
        let r2 = radius * radius;
        let x = data.points();
        (0..n)
            .filter(|&i| {
                let close = (0..n)
                    .filter(|&j| (0..d).map(|k| (x[(i, k)] - x[(j, k)]).powi(2)).sum::<f64>() <= r2)
                    .count();
                2 * close >= n
            })
            .collect()
    } else {
        (0..n).collect()
    };
    if kept.is_empty() {
        return Err(Error::Collapsed);
    }
    let x = data.points();
    let center = (0..d)
        .map(|k| kept.iter().map(|&i| x[(i, k)]).sum::<f64>() / kept.len() as f64)
        .collect();
    Ok(PruneResult {
        kept,
        center,
        radius,
    })
}
