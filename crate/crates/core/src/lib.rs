//! Numerics for the near-critical biharmonic problem
//! `Δ²u = u^{p∓ε}` with Navier conditions `u = Δu = 0` on a ball.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: quadrature, radial grids, finite-difference stencils and
//!   log-log fits, generic over the scalar type.
//! - [`bubble`]: the bubble family `δ_{a,λ}` and the universal constants
//!   `c₀, S, c₁, c₂`, also generic over the scalar type.
//! - [`green_robin`]: Navier Green's function, its regular part `H` and the
//!   Robin function `φ(x) = H(x, x)` on balls.
//! - [`projection`]: projected bubbles `Pδ` and the deficit `θ = δ − Pδ`.
//! - [`solver`]: radial Newton continuation and bubble decomposition.
//! - [`reduction`]: Gram matrix, coercivity, balance laws, reduced fixed point
//!   and the supercritical sign obstruction.
//! - [`cli`] and [`report`]: experiment orchestration and CSV/JSON output.
//!
//! Everything downstream of `bubble` works in `f64`; the aliases below pin
//! the generic building blocks to concrete precisions.

// `!(x > 0.0)` also rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bubble;
pub mod cli;
pub mod error;
pub mod green_robin;
pub mod numerics;
pub mod projection;
pub mod reduction;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use numerics::Real;

pub type RadialGrid64 = numerics::RadialGrid<f64>;
pub type RadialGrid32 = numerics::RadialGrid<f32>;
pub type SlopeFit64 = numerics::SlopeFit<f64>;
pub type SlopeFit32 = numerics::SlopeFit<f32>;
pub type BubbleParams64 = bubble::BubbleParams<f64>;
pub type BubbleParams32 = bubble::BubbleParams<f32>;
pub type CriticalConstants64 = bubble::CriticalConstants<f64>;
