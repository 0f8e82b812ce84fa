//! Shared quadrature and discrete-calculus kernels.
//!
//! All kernels here are generic over [`Real`], so the same code runs in `f32`
//! and `f64`. Tolerances in [`QuadConfig`] should be chosen relative to the
//! precision in use.

mod fit;
mod grid;
mod quadrature;
mod stencil;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

use crate::error::{Error, Result};

pub use fit::{fit_loglog, fit_loglog_corrected, least_squares, SlopeFit};
pub use grid::{GridKind, RadialGrid, MIN_NODES};
pub use quadrature::{
    gauss_legendre, integrate, integrate_to_infinity, radial_integral, radial_integral_scaled,
    sphere_integral_axisymmetric, QuadConfig, RadialRange,
};
pub use stencil::{
    fornberg_weights, radial_bilaplacian, radial_bilaplacian_order, radial_laplacian,
};

/// Floating-point scalar used throughout the generic kernels.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion of an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_(k: usize) -> Self {
        Self::from_usize(k).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `Γ(m/2)` for a positive integer `m`, by the half-integer recursion.
pub fn gamma_half<T: Real>(m: usize) -> T {
    assert!(m > 0, "gamma_half needs m >= 1");
    let (mut value, mut arg) = if m.is_multiple_of(2) {
        (T::one(), T::one())
    } else {
        (T::PI().sqrt(), T::lit(0.5))
    };
    let target = T::lit(m as f64 / 2.0);
    while arg < target {
        value = value * arg;
        arg = arg + T::one();
    }
    value
}

/// Surface measure `|S^{n−1}| = 2π^{n/2}/Γ(n/2)` of the unit sphere in `R^n`.
pub fn sphere_measure<T: Real>(n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::Dimension {
            n,
            reason: "sphere measure needs n >= 2",
        });
    }
    let half_n = T::lit(n as f64 / 2.0);
    Ok(T::lit(2.0) * T::PI().powf(half_n) / gamma_half::<T>(n))
}

/// Volume of the unit ball in `R^n`.
pub fn ball_volume<T: Real>(n: usize) -> Result<T> {
    Ok(sphere_measure::<T>(n)? / T::from_usize_(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_measure_small_dimensions() {
        assert!((sphere_measure::<f64>(2).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_measure::<f64>(3).unwrap() - 4.0 * PI).abs() < 1e-13);
        // 2π³/Γ(3)
        assert!((sphere_measure::<f64>(6).unwrap() - PI.powi(3)).abs() < 1e-12);
        // 2π^{5/2}/Γ(5/2) with Γ(5/2) = 3√π/4
        assert!((sphere_measure::<f64>(5).unwrap() - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_measure_rejects_n_below_two() {
        assert!(sphere_measure::<f64>(1).is_err());
        assert!(sphere_measure::<f64>(0).is_err());
    }

    #[test]
    fn sphere_measure_f32_agrees() {
        let a = sphere_measure::<f32>(7).unwrap() as f64;
        let b = sphere_measure::<f64>(7).unwrap();
        assert!((a - b).abs() / b < 1e-6);
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half::<f64>(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half::<f64>(8) - 6.0).abs() < 1e-14);
        assert!((gamma_half::<f64>(7) - 15.0 / 8.0 * PI.sqrt()).abs() < 1e-14);
    }
}
