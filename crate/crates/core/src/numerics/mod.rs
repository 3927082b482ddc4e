//! Special functions, bracketed root-finding and adaptive quadrature.
//!
//! Everything here is a pure function of its arguments.

mod quad;
mod roots;
mod special;

pub use quad::{integrate, integrate_with, QuadOptions, QuadratureResult};
pub use roots::{find_root, find_root_with, Bracket, RootOptions};
pub use special::{
    beta_quantile, gamma_quantile, log_beta, log_gamma, reg_inc_beta, reg_inc_gamma,
    reg_inc_gamma_upper, student_t_cdf, student_t_quantile, student_t_sf,
};

/// Absolute tolerance used for special-function based computations.
pub const SPECIAL_TOL: f64 = 1e-10;

/// Default absolute tolerance on root brackets.
pub const ROOT_TOL: f64 = 1e-9;
