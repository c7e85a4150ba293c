//! Ginzburg-Landau minimizers with rapidly oscillating coefficients.
//!
//! The crate minimizes `E(u) = ½∫ ∇u·A(x/δ)∇u + (1/4ε²)∫(1-|u|²)²` on the
//! square `[-1, 1]²`, locates vortices, solves the periodic cell problem for
//! the homogenized matrix `A⁰`, unfolds fields onto `Ω × Y`, and computes
//! minimal energies of S¹-valued maps on annuli.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod annulus;
pub mod boundary;
pub mod cell;
mod dst;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod gl;
pub mod grid;
pub mod io;
pub mod material;
pub mod pipeline;
pub mod unfolding;
pub mod vortex;

pub use error::{Error, Result};
