//! The bubble family `δ_{a,λ}(x) = c₀λ^k / (1 + λ²|x−a|²)^k`, `k = (n−4)/2`,
//! its parameter derivatives and the universal constants built from it.
//!
//! All derivatives are closed forms. With `s = λ²|x−a|²`:
//!
//! - `λ∂_λδ = k(1−s)/(1+s)·δ`
//! - `∂_aδ = (n−4)λ²(x−a)δ/(1+s)`
//! - `Δδ = −(n−4)c₀λ^{k+2}(n+2s)(1+s)^{−n/2}`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    fit_loglog, radial_integral_scaled, QuadConfig, RadialRange, Real, SlopeFit,
};

fn check_dimension(n: usize) -> Result<()> {
    if n < 5 {
        return Err(Error::Dimension {
            n,
            reason: "the bubble family needs n >= 5",
        });
    }
    Ok(())
}

/// `c₀ = [(n−4)(n−2)n(n+2)]^{(n−4)/8}`.
pub fn c0<T: Real>(n: usize) -> Result<T> {
    check_dimension(n)?;
    let nf = n as f64;
    let base = T::lit((nf - 4.0) * (nf - 2.0) * nf * (nf + 2.0));
    Ok(base.powf(T::lit((nf - 4.0) / 8.0)))
}

/// Critical exponent `p = (n+4)/(n−4)`.
pub fn critical_exponent<T: Real>(n: usize) -> Result<T> {
    check_dimension(n)?;
    Ok(T::lit((n as f64 + 4.0) / (n as f64 - 4.0)))
}

/// Center and scale of one bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams<T> {
    pub a: Vec<T>,
    pub lambda: T,
    pub n: usize,
}

impl<T: Real> BubbleParams<T> {
    pub fn new(a: Vec<T>, lambda: T) -> Result<Self> {
        let n = a.len();
        check_dimension(n)?;
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::invalid("bubble scale must be positive and finite"));
        }
        Ok(Self { a, lambda, n })
    }

    /// Bubble centered at the origin of `R^n`.
    pub fn centered(n: usize, lambda: T) -> Result<Self> {
        Self::new(vec![T::zero(); n], lambda)
    }

    pub fn radial(&self) -> Result<RadialBubble<T>> {
        RadialBubble::new(self.n, self.lambda)
    }

    fn dist2(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.n);
        self.a
            .iter()
            .zip(x)
            .fold(T::zero(), |s, (a, x)| s + (*x - *a) * (*x - *a))
    }
}

/// Radial profile of `δ_{a,λ}` as a function of `r = |x − a|`.
#[derive(Debug, Clone, Copy)]
pub struct RadialBubble<T> {
    pub n: usize,
    pub lambda: T,
    pub c0: T,
    k: T,
}

impl<T: Real> RadialBubble<T> {
    pub fn new(n: usize, lambda: T) -> Result<Self> {
        Ok(Self {
            n,
            lambda,
            c0: c0(n)?,
            k: T::lit((n as f64 - 4.0) / 2.0),
        })
    }

    fn s(&self, r: T) -> T {
        self.lambda * self.lambda * r * r
    }

    fn nf(&self) -> T {
        T::from_usize_(self.n)
    }

    pub fn value(&self, r: T) -> T {
        self.c0 * self.lambda.powf(self.k) * (T::one() + self.s(r)).powf(-self.k)
    }

    /// `δ'(r)`.
    pub fn dr(&self, r: T) -> T {
        let l2 = self.lambda * self.lambda;
        -(T::lit(2.0) * self.k) * l2 * r * self.value(r) / (T::one() + self.s(r))
    }

    /// `λ∂_λδ`.
    pub fn lambda_dlambda(&self, r: T) -> T {
        let s = self.s(r);
        self.k * (T::one() - s) / (T::one() + s) * self.value(r)
    }

    /// Radial factor `g` in `∂_aδ = g(r)·(x − a)`.
    pub fn da_factor(&self, r: T) -> T {
        let l2 = self.lambda * self.lambda;
        T::lit(2.0) * self.k * l2 * self.value(r) / (T::one() + self.s(r))
    }

    /// `Δδ`.
    pub fn laplacian(&self, r: T) -> T {
        let s = self.s(r);
        let two = T::lit(2.0);
        -(two * self.k)
            * self.c0
            * self.lambda.powf(self.k + two)
            * (self.nf() + two * s)
            * (T::one() + s).powf(-self.nf() / two)
    }

    /// `(Δδ)'(r)`.
    pub fn laplacian_dr(&self, r: T) -> T {
        let s = self.s(r);
        let l2r = self.lambda * self.lambda * r;
        let two = T::lit(2.0);
        self.laplacian(r)
            * (two * two * l2r / (self.nf() + two * s) - self.nf() * l2r / (T::one() + s))
    }

    /// `λ∂_λ(Δδ)`.
    pub fn lambda_dlambda_laplacian(&self, r: T) -> T {
        let s = self.s(r);
        let two = T::lit(2.0);
        self.laplacian(r)
            * ((self.k + two) + two * two * s / (self.nf() + two * s)
                - self.nf() * s / (T::one() + s))
    }
}

pub fn eval_delta<T: Real>(params: &BubbleParams<T>, x: &[T]) -> T {
    let prof = RadialBubble::new(params.n, params.lambda).expect("validated params");
    prof.value(params.dist2(x).sqrt())
}

/// `λ ∂δ/∂λ` at `x`.
pub fn dlambda_delta<T: Real>(params: &BubbleParams<T>, x: &[T]) -> T {
    let prof = RadialBubble::new(params.n, params.lambda).expect("validated params");
    prof.lambda_dlambda(params.dist2(x).sqrt())
}

/// Gradient of `δ_{a,λ}(x)` with respect to the center `a`.
pub fn da_delta<T: Real>(params: &BubbleParams<T>, x: &[T]) -> Vec<T> {
    let prof = RadialBubble::new(params.n, params.lambda).expect("validated params");
    let g = prof.da_factor(params.dist2(x).sqrt());
    x.iter()
        .zip(&params.a)
        .map(|(x, a)| g * (*x - *a))
        .collect()
}

/// Sobolev quotient data for the extremal `δ_{0,λ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevConstant<T> {
    /// `S`.
    pub s: T,
    /// `∫_{R^n} |Δδ|²`.
    pub laplacian_energy: T,
    /// `∫_{R^n} δ^{2n/(n−4)}`.
    pub lp_energy: T,
}

impl<T: Real> SobolevConstant<T> {
    /// `S^{n/4}`, taken from the `|Δδ|²` integral.
    pub fn s_n4(&self) -> T {
        self.laplacian_energy
    }
}

/// `S` computed from `δ_{0,1}`.
pub fn sobolev_constant<T: Real>(n: usize) -> Result<SobolevConstant<T>> {
    sobolev_constant_at(n, T::one())
}

/// `S` computed from `δ_{0,λ}`; the quotient does not depend on `λ`.
pub fn sobolev_constant_at<T: Real>(n: usize, lambda: T) -> Result<SobolevConstant<T>> {
    let prof = RadialBubble::new(n, lambda)?;
    let cfg = QuadConfig::default();
    let scale = T::one() / lambda;
    let lap = radial_integral_scaled(
        n,
        |r| {
            let v = prof.laplacian(r);
            v * v
        },
        RadialRange::Infinite,
        scale,
        &cfg,
    )?;
    let q = T::lit(2.0 * n as f64 / (n as f64 - 4.0));
    let lp = radial_integral_scaled(
        n,
        |r| prof.value(r).powf(q),
        RadialRange::Infinite,
        scale,
        &cfg,
    )?;
    let s = lap / lp.powf(T::lit((n as f64 - 4.0) / n as f64));
    Ok(SobolevConstant {
        s,
        laplacian_energy: lap,
        lp_energy: lp,
    })
}

/// Constants of the blow-up balance.
///
/// Two candidate integrals for `c₂` differ in sign and by a factor 2;
/// both are kept and `c2` holds the one that is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants<T> {
    pub n: usize,
    pub c0: T,
    pub p: T,
    #[serde(rename = "S")]
    pub s: T,
    /// `S^{n/4} = ∫_{R^n}|Δδ_{0,1}|²`.
    pub s_n4: T,
    pub c1: T,
    /// `(n−4)c₀^{2n/(n−4)} ∫ log(1+|x|²)(1−|x|²)/(1+|x|²)^{n+1}`.
    pub c2_thm: T,
    /// `(n−4)/2·c₀^{2n/(n−4)} ∫ log(1+|x|²)(|x|²−1)/(1+|x|²)^{n+1}`.
    pub c2_e34: T,
    pub c2: T,
}

impl<T: Real> CriticalConstants<T> {
    pub fn c2_ratio(&self) -> T {
        self.c2_thm / self.c2_e34
    }

    /// `(c₁c₀²/c₂)·φ` for a given Robin value.
    pub fn blowup_limit(&self, phi: T) -> T {
        self.c1 * self.c0 * self.c0 / self.c2 * phi
    }
}

pub fn balance_constants<T: Real>(n: usize) -> Result<CriticalConstants<T>> {
    balance_constants_with(n, T::lit(1e-12))
}

/// [`balance_constants`] at a given relative quadrature tolerance, floored at
/// `64·eps` of `T`.
pub fn balance_constants_with<T: Real>(n: usize, rel_tol: T) -> Result<CriticalConstants<T>> {
    check_dimension(n)?;
    if !(rel_tol > T::zero()) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let nf = n as f64;
    let c0v: T = c0(n)?;
    let pref = c0v.powf(T::lit(2.0 * nf / (nf - 4.0)));
    let cfg = QuadConfig::with_rel_tol(rel_tol.max(T::epsilon() * T::lit(64.0)));
    let one = T::one();
    let i1 = radial_integral_scaled(
        n,
        |r: T| (one + r * r).powf(T::lit(-(nf + 4.0) / 2.0)),
        RadialRange::Infinite,
        one,
        &cfg,
    )?;
    let ilog = radial_integral_scaled(
        n,
        |r: T| {
            let q = one + r * r;
            q.ln() * (one - r * r) * q.powi(-(n as i32) - 1)
        },
        RadialRange::Infinite,
        one,
        &cfg,
    )?;
    let c2_thm = T::lit(nf - 4.0) * pref * ilog;
    let c2_e34 = -T::lit((nf - 4.0) / 2.0) * pref * ilog;
    let c2 = if c2_e34 > T::zero() {
        c2_e34
    } else if c2_thm > T::zero() {
        c2_thm
    } else {
        return Err(Error::invalid("neither c2 convention is positive"));
    };
    let sob = sobolev_constant::<T>(n)?;
    Ok(CriticalConstants {
        n,
        c0: c0v,
        p: critical_exponent(n)?,
        s: sob.s,
        s_n4: sob.s_n4(),
        c1: pref * i1,
        c2_thm,
        c2_e34,
        c2,
    })
}

/// Default sample points for [`epsilon_power_expansion_check`]: log-spaced
/// radii in `[10⁻³/λ, 10³/λ]` along the first axis through `a`.
pub fn default_expansion_samples<T: Real>(params: &BubbleParams<T>, count: usize) -> Vec<Vec<T>> {
    let count = count.max(2);
    (0..count)
        .map(|i| {
            let t = T::lit(-3.0 + 6.0 * i as f64 / (count - 1) as f64);
            let r = T::lit(10.0).powf(t) / params.lambda;
            let mut x = params.a.clone();
            x[0] = x[0] + r;
            x
        })
        .collect()
}

/// Sup over samples of `|δ^{−ε} − (c₀λ^k)^{−ε}| / log(1+λ²|x−a|²)`, tracked
/// along `ε·2^{−j}`, `j = 0..6`, and fitted against `ε` on log-log axes.
///
/// A slope near 1 means the gap is `O(ε log(1+λ²|x−a|²))` uniformly over the
/// samples; `exp(intercept)` estimates the constant.
pub fn epsilon_power_expansion_check<T: Real>(
    params: &BubbleParams<T>,
    eps: T,
    sample_points: &[Vec<T>],
) -> Result<SlopeFit<T>> {
    if !(eps > T::zero()) || eps > T::lit(0.2) {
        return Err(Error::invalid("eps must lie in (0, 0.2]"));
    }
    let prof = params.radial()?;
    let peak = prof.value(T::zero());
    let l2 = params.lambda * params.lambda;
    let samples: Vec<(T, T)> = sample_points
        .iter()
        .map(|x| {
            (
                eval_delta(params, x),
                (T::one() + l2 * params.dist2(x)).ln(),
            )
        })
        .filter(|(_, lg)| *lg > T::epsilon().sqrt())
        .collect();
    if samples.is_empty() {
        return Err(Error::invalid(
            "no sample point away from the bubble center",
        ));
    }
    let mut es = Vec::new();
    let mut sups = Vec::new();
    for j in 0..7 {
        let e = eps * T::lit(0.5f64.powi(j));
        let base = peak.powf(-e);
        let sup = samples
            .iter()
            .map(|(d, lg)| (d.powf(-e) - base).abs() / *lg)
            .fold(T::zero(), T::max);
        es.push(e);
        sups.push(sup);
    }
    fit_loglog(&es, &sups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn c0_values() {
        assert!((c0::<f64>(6).unwrap() - 384f64.powf(0.25)).abs() < 1e-14);
        assert!((c0::<f64>(5).unwrap() - 105f64.powf(0.125)).abs() < 1e-14);
        assert!((c0::<f64>(8).unwrap() - 1920f64.sqrt()).abs() < 1e-12);
        assert!(c0::<f64>(4).is_err());
    }

    #[test]
    fn delta_point_values() {
        let p = BubbleParams::new(vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0], 3.0).unwrap();
        let c = c0::<f64>(6).unwrap();
        assert!((eval_delta(&p, &p.a) - c * 3.0).abs() < 1e-12);
        let q = BubbleParams::centered(6, 1.0).unwrap();
        let x = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((eval_delta(&q, &x) - c / 2.0).abs() < 1e-14);
    }

    #[test]
    fn dlambda_vanishes_on_unit_sphere() {
        let p = BubbleParams::<f64>::centered(6, 4.0).unwrap();
        let x = [0.0, 0.25, 0.0, 0.0, 0.0, 0.0];
        assert!(dlambda_delta(&p, &x).abs() < 1e-13);
        let at_a = dlambda_delta(&p, &p.a);
        assert!((at_a - eval_delta(&p, &p.a)).abs() < 1e-12);
    }

    #[test]
    fn laplacian_matches_stencil_free_derivative() {
        // Δδ = δ'' + (n−1)δ'/r with δ'' from central differences of δ'.
        for n in [5, 6, 8] {
            let b = RadialBubble::<f64>::new(n, 1.7).unwrap();
            for r in [0.3, 1.0, 2.5] {
                let h = 1e-5;
                let d2 = (b.dr(r + h) - b.dr(r - h)) / (2.0 * h);
                let lap = d2 + (n as f64 - 1.0) * b.dr(r) / r;
                assert!((lap - b.laplacian(r)).abs() < 1e-6 * b.laplacian(0.0).abs());
                let dl = (b.laplacian(r + h) - b.laplacian(r - h)) / (2.0 * h);
                assert!((dl - b.laplacian_dr(r)).abs() < 1e-6 * b.laplacian(0.0).abs());
            }
        }
    }

    #[test]
    fn sobolev_identity_n6() {
        let s = sobolev_constant::<f64>(6).unwrap();
        assert!((s.laplacian_energy - s.lp_energy).abs() / s.lp_energy < 1e-9);
        assert!((s.s_n4() - 3888.617).abs() < 1e-2);
    }

    #[test]
    fn c1_beta_closed_form_n6() {
        let c = balance_constants::<f64>(6).unwrap();
        let exact = 384f64.powf(1.5) * PI.powi(3) / 24.0;
        assert!((c.c1 - exact).abs() / exact < 1e-10);
        assert!(c.c2_e34 > 0.0);
        assert!((c.c2_ratio() + 2.0).abs() < 1e-10);
    }

    #[test]
    fn expansion_gap_zero_at_center() {
        let p = BubbleParams::<f64>::centered(6, 10.0).unwrap();
        let gap = eval_delta(&p, &p.a).powf(-0.1) - (c0::<f64>(6).unwrap() * 10.0).powf(-0.1);
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn expansion_gap_linear_in_eps() {
        let p = BubbleParams::<f64>::centered(6, 10.0).unwrap();
        let pts = default_expansion_samples(&p, 100);
        let fit = epsilon_power_expansion_check(&p, 0.1, &pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.1, "{fit:?}");
    }
}
