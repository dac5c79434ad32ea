//! Pseudospectral laboratory for the intermediate long wave (ILW) family on the
//! torus `T = R / 2πZ`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`] holds grids, Hermitian Fourier fields, norms and projectors.
//! * [`symbols`] evaluates the dispersion multipliers `Λ_δ`, `h`, `a_δ`, phases and
//!   resonance functions of KdV, scaled ILW, ILW and Benjamin–Ono.
//! * [`evolve`] integrates the flows in interaction representation with an
//!   integrating-factor RK4 scheme.
//! * [`integrable`] computes resolvent weights, Hilbert–Schmidt norms and the
//!   perturbation determinant `α(κ; u)`.
//! * [`normalform`] enumerates ordered trees and evaluates the tree-indexed
//!   multilinear operators of the iterated normal-form reduction.
//!
//! Fourier convention throughout: `û(ξ) = (2π)^{-1/2} ∫ u(x) e^{-ixξ} dx`, so that
//! Plancherel holds without constants and a product picks up one `(2π)^{-1/2}`
//! per convolution.

pub mod error;
pub mod evolve;
pub mod integrable;
pub mod normalform;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use evolve::{EvolutionProblem, Trajectory};
pub use spectral::{Grid, SpectralField};
pub use symbols::DispersionSymbol;
