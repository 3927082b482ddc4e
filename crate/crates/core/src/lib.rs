//! Objective Bayesian inference for the bivariate normal distribution under
//! the probability-matching prior `π(μ₁, μ₂, β, θ, η) ∝ (θη)⁻¹`.
//!
//! With `β = ρσ₂/σ₁` (regression slope), `θ = σ₁σ₂√(1−ρ²)` (root generalized
//! variance) and `η = σ₂√(1−ρ²)/σ₁`, the marginal posteriors are available in
//! closed form or by one-dimensional quadrature; see [`posterior`]. Credible
//! intervals live in [`interval`], the frequentist coverage simulation in
//! [`coverage`] and the numerical checks of the prior's defining identities in
//! [`matching`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coverage;
pub mod error;
pub mod interval;
pub mod matching;
pub mod model;
pub mod numerics;
pub mod posterior;

pub use error::{Error, Result};
