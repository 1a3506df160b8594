//! Numerical laboratory for the stationary asymmetric simple exclusion process
//! (ASEP) and the stochastic six-vertex model with double-sided Bernoulli
//! initial data.
//!
//! The crate provides
//!
//! * parameter handling and scaling constants ([`params`]),
//! * q-Pochhammer symbols ([`qseries`]),
//! * an exact transfer-matrix engine and a Monte Carlo sampler for the
//!   stochastic six-vertex model ([`vertex_model`]),
//! * an exact ASEP sampler built on the graphical (Harris) construction,
//!   simulating only the backward light cone of the observed site ([`asep`]),
//! * the boundary weights and symmetric-function specializations that enter the
//!   exact identities ([`weights`]),
//! * contour quadrature, the Fredholm kernels and Fredholm determinant
//!   evaluators ([`contour`]),
//! * the Airy function, Airy kernel and the Baik–Rains distribution ([`airy`]),
//! * experiment orchestration and statistics ([`harness`]).
//!
//! All numerics run in `f64` / `Complex<f64>`; see [`Real`] and [`Cplx`].

pub mod airy;
pub mod asep;
pub mod contour;
pub mod harness;
pub mod params;
pub mod qseries;
pub mod rng;
pub mod vertex_model;
pub mod weights;

/// Real scalar used throughout the crate.
pub type Real = f64;

/// Complex scalar used throughout the crate.
pub type Cplx = num_complex::Complex<f64>;

/// Shorthand constructor for a complex number.
#[inline]
pub fn c(re: Real, im: Real) -> Cplx {
    Cplx::new(re, im)
}
