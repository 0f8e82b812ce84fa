//! Projected bubbles `Pδ` and the deficit `θ = δ − Pδ` on balls.
//!
//! `θ` is biharmonic with `θ = δ`, `Δθ = Δδ` on the boundary. For a bubble
//! centered at the ball center the data are constant on the sphere and
//! `θ = A + B|y−c|²` with `A + BR² = δ(R)`, `2nB = Δδ(R)`. Parameter
//! derivatives inherit the same structure:
//!
//! - `λ∂_λθ = A' + B'r²` from the data `λ∂_λδ(R)`, `λ∂_λΔδ(R)`,
//! - `∂_{a_i}θ = (C + Dr²)y_i` with `C + DR² = g(R)`, `(2n+4)D = h(R)`,
//!   where `∂_aδ = g(r)(x−a)` and `−(Δδ)'(r)/r = h(r)`.
//!
//! Off-center bubbles go through the axisymmetric two-stage solver.

use serde::{Deserialize, Serialize};

use crate::bubble::{eval_delta, BubbleParams, RadialBubble};
use crate::error::{Error, Result};
use crate::green_robin::{dot, navier_dirichlet_ball, norm, regular_part_h, BallDomain};
use crate::numerics::{
    ball_volume, fit_loglog, radial_integral_scaled, QuadConfig, RadialRange, SlopeFit,
};

/// Default admissibility threshold on `λ·d(a, ∂Ω)`.
pub const DEFAULT_MIN_LAMBDA_D: f64 = 5.0;

/// `Pδ` and its parameter derivatives for a bubble at the ball center, as
/// functions of `r = |x − c|`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedRadial {
    pub bubble: RadialBubble<f64>,
    pub radius: f64,
    n: f64,
    theta: (f64, f64),
    theta_dlambda: (f64, f64),
    theta_da: (f64, f64),
}

impl ProjectedRadial {
    pub fn new(n: usize, lambda: f64, radius: f64) -> Result<Self> {
        let b = RadialBubble::new(n, lambda)?;
        if !(radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        let nf = n as f64;
        let r2 = radius * radius;
        let fit = |bc: f64, lap: f64| {
            let bq = lap / (2.0 * nf);
            (bc - bq * r2, bq)
        };
        let theta = fit(b.value(radius), b.laplacian(radius));
        let theta_dlambda = fit(b.lambda_dlambda(radius), b.lambda_dlambda_laplacian(radius));
        let d = -b.laplacian_dr(radius) / radius / (2.0 * nf + 4.0);
        let theta_da = (b.da_factor(radius) - d * r2, d);
        Ok(Self {
            bubble: b,
            radius,
            n: nf,
            theta,
            theta_dlambda,
            theta_da,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.bubble.lambda
    }

    pub fn theta(&self, r: f64) -> f64 {
        self.theta.0 + self.theta.1 * r * r
    }

    /// Constant value of `Δθ`.
    pub fn theta_laplacian(&self) -> f64 {
        2.0 * self.n * self.theta.1
    }

    pub fn value(&self, r: f64) -> f64 {
        self.bubble.value(r) - self.theta(r)
    }

    pub fn laplacian(&self, r: f64) -> f64 {
        self.bubble.laplacian(r) - self.theta_laplacian()
    }

    /// `λ∂_λPδ`.
    pub fn lambda_dlambda(&self, r: f64) -> f64 {
        self.bubble.lambda_dlambda(r) - (self.theta_dlambda.0 + self.theta_dlambda.1 * r * r)
    }

    /// `Δ(λ∂_λPδ)`.
    pub fn lambda_dlambda_laplacian(&self, r: f64) -> f64 {
        self.bubble.lambda_dlambda_laplacian(r) - 2.0 * self.n * self.theta_dlambda.1
    }

    /// Radial factor of `∂_{a_i}Pδ = G(r)·(x − c)_i`.
    pub fn da_factor(&self, r: f64) -> f64 {
        self.bubble.da_factor(r) - (self.theta_da.0 + self.theta_da.1 * r * r)
    }

    /// Radial factor of `Δ∂_{a_i}Pδ`.
    pub fn da_laplacian_factor(&self, r: f64) -> f64 {
        let h = |r: f64| -self.bubble.laplacian_dr(r) / r;
        let hr = if r > 0.0 {
            h(r)
        } else {
            h(1e-8 / self.lambda())
        };
        hr - (2.0 * self.n + 4.0) * self.theta_da.1
    }

    /// `‖Pδ‖² = ∫_Ω |ΔPδ|²`.
    pub fn energy(&self) -> Result<f64> {
        radial_integral_scaled(
            self.n as usize,
            |r| self.laplacian(r).powi(2),
            RadialRange::Finite(self.radius),
            1.0 / self.lambda(),
            &QuadConfig::with_rel_tol(1e-11),
        )
    }
}

fn check_regime(params: &BubbleParams<f64>, domain: &BallDomain, min_lambda_d: f64) -> Result<f64> {
    if params.n != domain.n {
        return Err(Error::invalid("bubble and domain dimensions differ"));
    }
    let d = domain.distance_to_boundary(&params.a);
    if !(d > 0.0) {
        return Err(Error::OutsideDomain(format!(
            "bubble center {:?}",
            params.a
        )));
    }
    if params.lambda * d < min_lambda_d {
        return Err(Error::invalid(format!(
            "λ·d = {:.3} is below the expansion threshold {min_lambda_d}",
            params.lambda * d
        )));
    }
    Ok(d)
}

fn is_centered(params: &BubbleParams<f64>, domain: &BallDomain) -> bool {
    params
        .a
        .iter()
        .zip(&domain.center)
        .all(|(a, c)| (a - c).abs() <= 1e-14 * domain.radius)
}

/// `θ(x) = δ(x) − Pδ(x)` with the default `λd` threshold.
pub fn theta(params: &BubbleParams<f64>, domain: &BallDomain, x: &[f64]) -> Result<f64> {
    theta_with_threshold(params, domain, x, DEFAULT_MIN_LAMBDA_D)
}

pub fn theta_with_threshold(
    params: &BubbleParams<f64>,
    domain: &BallDomain,
    x: &[f64],
    min_lambda_d: f64,
) -> Result<f64> {
    check_regime(params, domain, min_lambda_d)?;
    let xu = domain.to_unit(x);
    if norm(&xu) > 1.0 + 1e-12 {
        return Err(Error::OutsideDomain(format!("x = {x:?}")));
    }
    if is_centered(params, domain) {
        let pr = ProjectedRadial::new(domain.n, params.lambda, domain.radius)?;
        return Ok(pr.theta(norm(&xu) * domain.radius));
    }
    // Axis through the bubble center; (y1, y2) are coordinates of x in the
    // plane spanned by that axis and x.
    let au = domain.to_unit(&params.a);
    let alen = norm(&au);
    let axis: Vec<f64> = au.iter().map(|v| v / alen).collect();
    let y1 = dot(&xu, &axis);
    let y2 = (dot(&xu, &xu) - y1 * y1).max(0.0).sqrt();
    let bubble = params.radial()?;
    let rr = domain.radius;
    let dist = |z1: f64| {
        (rr * rr * (1.0 + alen * alen - 2.0 * alen * z1))
            .max(0.0)
            .sqrt()
    };
    let g0 = |z1: f64| bubble.value(dist(z1));
    let g1 = |z1: f64| rr * rr * bubble.laplacian(dist(z1));
    if norm(&xu) >= 1.0 - 1e-12 {
        return Ok(g0(y1.clamp(-1.0, 1.0)));
    }
    navier_dirichlet_ball(domain.n, g0, g1, y1, y2)
}

/// `Pδ(x) = δ(x) − θ(x)`.
pub fn pdelta(params: &BubbleParams<f64>, domain: &BallDomain, x: &[f64]) -> Result<f64> {
    Ok(eval_delta(params, x) - theta(params, domain, x)?)
}

/// Split `θ = c₀H(a,·)/λ^{(n−4)/2} + f` measured on the core `B(a, d/2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaExpansion {
    pub params: BubbleParams<f64>,
    pub domain: BallDomain,
    pub d: f64,
    /// `c₀/λ^{(n−4)/2}`, the factor in front of `H(a,·)`.
    pub leading_coefficient: f64,
    /// `sup |f|` over the core samples.
    pub remainder_norm: f64,
}

impl ThetaExpansion {
    /// Samples the core along a segment through `a` with `samples` points.
    pub fn new(params: &BubbleParams<f64>, domain: &BallDomain, samples: usize) -> Result<Self> {
        let d = check_regime(params, domain, DEFAULT_MIN_LAMBDA_D)?;
        let k = (domain.n as f64 - 4.0) / 2.0;
        let coef = params.radial()?.c0 / params.lambda.powf(k);
        let mut sup: f64 = 0.0;
        let samples = samples.max(2);
        for i in 0..samples {
            let t = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
            let mut x = params.a.clone();
            x[0] += 0.5 * d * t;
            let f = theta(params, domain, &x)? - coef * regular_part_h(domain, &params.a, &x)?;
            sup = sup.max(f.abs());
        }
        Ok(Self {
            params: params.clone(),
            domain: domain.clone(),
            d,
            leading_coefficient: coef,
            remainder_norm: sup,
        })
    }

    pub fn leading(&self, x: &[f64]) -> Result<f64> {
        Ok(self.leading_coefficient * regular_part_h(&self.domain, &self.params.a, x)?)
    }
}

/// Per-`λ` measurements of the expansion and their fitted `λ`-exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionOrders {
    pub lambdas: Vec<f64>,
    /// `‖θ‖ = (∫_Ω |Δθ|²)^{1/2}`.
    pub theta_norm: Vec<f64>,
    /// `sup |f|` on the core `B(a, d/2)`.
    pub remainder_sup: Vec<f64>,
    /// `|θ|_{L^{2n/(n−4)}(Ω)}`.
    pub theta_lq: Vec<f64>,
    pub theta_norm_fit: SlopeFit<f64>,
    pub remainder_fit: SlopeFit<f64>,
    pub theta_lq_fit: SlopeFit<f64>,
}

/// Number of core samples in the remainder sup norm.
const CORE_SAMPLES: usize = 64;

/// Measures `θ`, `f` and their norms over a `λ`-family centered at the ball
/// center and fits exponents in `λ`.
pub fn expansion_orders(lambdas: &[f64], domain: &BallDomain) -> Result<ExpansionOrders> {
    if lambdas.len() < 4 {
        return Err(Error::invalid("expansion fits need at least 4 scales"));
    }
    let (lo, hi) = lambdas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    if (hi / lo).log10() < 1.5 {
        return Err(Error::invalid("λ·d must span at least 1.5 decades"));
    }
    let n = domain.n;
    let nf = n as f64;
    let q = 2.0 * nf / (nf - 4.0);
    let k = (nf - 4.0) / 2.0;
    let rr = domain.radius;
    let vol = ball_volume::<f64>(n)? * rr.powi(n as i32);
    let h_center = |r: f64| -> Result<f64> {
        let mut y = domain.center.clone();
        y[0] += r;
        regular_part_h(domain, &domain.center, &y)
    };
    let mut out = ExpansionOrders {
        lambdas: lambdas.to_vec(),
        theta_norm: Vec::new(),
        remainder_sup: Vec::new(),
        theta_lq: Vec::new(),
        theta_norm_fit: zero_fit(),
        remainder_fit: zero_fit(),
        theta_lq_fit: zero_fit(),
    };
    for &lambda in lambdas {
        let params = BubbleParams::new(domain.center.clone(), lambda)?;
        check_regime(&params, domain, DEFAULT_MIN_LAMBDA_D)?;
        let pr = ProjectedRadial::new(n, lambda, rr)?;
        out.theta_norm
            .push((pr.theta_laplacian().powi(2) * vol).sqrt());
        let coef = pr.bubble.c0 / lambda.powf(k);
        let mut sup: f64 = 0.0;
        for i in 0..CORE_SAMPLES {
            let r = 0.5 * rr * i as f64 / (CORE_SAMPLES - 1) as f64;
            sup = sup.max((pr.theta(r) - coef * h_center(r)?).abs());
        }
        out.remainder_sup.push(sup);
        let lq = radial_integral_scaled(
            n,
            |r| pr.theta(r).abs().powf(q),
            RadialRange::Finite(rr),
            rr,
            &QuadConfig::with_rel_tol(1e-11),
        )?;
        out.theta_lq.push(lq.powf(1.0 / q));
    }
    out.theta_norm_fit = fit_loglog(lambdas, &out.theta_norm)?;
    out.remainder_fit = fit_loglog(lambdas, &out.remainder_sup)?;
    out.theta_lq_fit = fit_loglog(lambdas, &out.theta_lq)?;
    Ok(out)
}

fn zero_fit() -> SlopeFit<f64> {
    SlopeFit {
        slope: 0.0,
        intercept: 0.0,
        rms_residual: 0.0,
        points: 0,
    }
}
