//! Robust estimation by descent on generalized quasi-gradients.
//!
//! An estimate is a reweighting `q` of the observed points inside the set of
//! deletions `Δ_{n,ε}`. Each task supplies an objective `F(q)` together with a
//! per-point vector `g` that points away from the good points; the solvers in
//! [`solvers`] drive `F` below a threshold by shrinking weight where `g` is large.
//!
//! ```
//! use nalgebra::DMatrix;
//! use quasigrad::{solvers, TaskObjective, WeightedDataset};
//!
//! let mut xs = vec![0.0; 9];
//! xs.push(10.0);
//! let data = WeightedDataset::new(DMatrix::from_column_slice(10, 1, &xs)).unwrap();
//! let objective = TaskObjective::mean_bounded_cov(0.1, 1.0);
//! let report = solvers::filter_solve(&data, &objective, &Default::default()).unwrap();
//! assert!(report.estimate.location()[0].abs() < 1e-9);
//! ```

mod data;
mod error;
pub mod geometry;
pub mod landscape;
pub mod objectives;
pub mod sim;
pub mod solvers;

pub use data::{
    restrict_to_set, tv_discrete, tv_half_l1, weighted_moments, Moments, WeightVector,
    WeightedDataset, SIMPLEX_TOLERANCE,
};
pub use error::{Error, Result};
pub use objectives::{NoiseThresholdForm, Task, TaskObjective, TaskParams};
