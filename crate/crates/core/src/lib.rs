//! Parameter-space geometry of the quartic oscillator
//! `H = p²/2 + (k/2) q² + (λ/24) q⁴` over the parameter plane `(k, λ)`.
//!
//! Quantum side: Fock-basis spectra ([`fock`]) and the ground-state quantum
//! metric tensor ([`qmt`]). Classical side: action-angle orbits ([`orbit`])
//! and canonical perturbation theory ([`cpt`]), yielding the classical metric
//! tensor of the time-averaged deformation functions. Shared: scalar
//! curvature of either metric field ([`geometry`]), embedded series
//! coefficients and semiclassical action fits ([`tables`]), and batch
//! drivers ([`sweep`]).

#![forbid(unsafe_code)]

pub mod cpt;
pub mod fock;
pub mod geometry;
pub mod model;
pub mod orbit;
pub mod qmt;
pub mod sweep;
pub mod tables;

mod error;

pub use error::{Error, Result};
