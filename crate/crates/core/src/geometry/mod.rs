//! Projections onto the deletion set and direction finders for the task objectives.

mod direction;
mod linalg;
mod projection;

pub use direction::{
    canonical_sign, generalized_rayleigh_sup, quartic_ratio_grid, quartic_ratio_sup,
    top_eigendirection, top_eigendirection_of, Centering, DirectionResult, DEFAULT_RESTARTS,
};
pub use linalg::{pseudo_inverse, whitening, PINV_RELATIVE_TOLERANCE};
pub use projection::{project_kl_deleted_simplex, renormalize};
