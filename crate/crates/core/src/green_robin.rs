//! Navier Green's function of `Δ²` on balls, its regular part `H` and the
//! Robin function `φ(x) = H(x, x)`.
//!
//! On the unit ball write `q_x(y) = |x|²|y|² − 2x·y + 1 = (|x|·|y − x*|)²`,
//! which equals `|x − y|²` when `|y| = 1`. `H(x, ·)` is biharmonic with
//! `H = |x−·|^{4−n}` and `ΔH = 2(4−n)|x−·|^{2−n}` on the sphere. The Navier
//! problem splits into two Dirichlet problems, and for these data both have
//! closed-form kernels:
//!
//! ```text
//! H(x,y) = q_x(y)^{(4−n)/2}
//!        + (|y|²−1)(4−n)(1−|x|²)/2 · ∫₀¹ t^{n/2−1} q_x(ty)^{(2−n)/2} dt
//! ```
//!
//! The first term is the Kelvin image of the singularity. The second term
//! solves `Δψ = g`, `ψ = 0` on the sphere, for harmonic `g`, via
//! `ψ = (|y|²−1)/4 · ∫₀¹ t^{n/2−1} g(ty) dt`.
//!
//! [`navier_dirichlet_ball`] runs the same two stages for arbitrary
//! axisymmetric boundary data through Poisson integrals; it is the general
//! path used for off-center projections.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    fit_loglog_corrected, gauss_legendre, integrate, sphere_integral_axisymmetric, sphere_measure,
    QuadConfig, SlopeFit,
};

/// Ball `{x : |x − center| < radius}` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallDomain {
    pub n: usize,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallDomain {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        if n < 5 {
            return Err(Error::Dimension {
                n,
                reason: "ball domains are used with n >= 5",
            });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid("ball radius must be positive"));
        }
        Ok(Self { n, center, radius })
    }

    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], 1.0)
    }

    pub fn centered(n: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; n], radius)
    }

    /// Coordinates of `x` in the unit ball obtained by `(x − c)/R`.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) / self.radius)
            .collect()
    }

    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.radius * (1.0 - norm(&self.to_unit(x)))
    }

    /// Point at signed offset `t·R` from the center along axis `axis`.
    pub fn point_on_axis(&self, axis: usize, t: f64) -> Vec<f64> {
        let mut x = self.center.clone();
        x[axis] += t * self.radius;
        x
    }

    fn check_interior(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "{what}: expected {} coordinates",
                self.n
            )));
        }
        if norm(&self.to_unit(x)) >= 1.0 {
            return Err(Error::OutsideDomain(format!("{what} = {x:?}")));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `q_x(y) = |x|²|y|² − 2x·y + 1`, written so it stays accurate near `y = x*`.
fn image_distance2(x: &[f64], y: &[f64]) -> f64 {
    let xx = dot(x, x);
    let yy = dot(y, y);
    // |x − y|² + (1 − |x|²)(1 − |y|²)
    dist(x, y).powi(2) + (1.0 - xx) * (1.0 - yy)
}

fn quad_cfg() -> QuadConfig<f64> {
    QuadConfig::with_rel_tol(1e-13)
}

/// Dirichlet Green's function of `−Δ` on the ball, `−Δ_y G_L(x,·) = δ_x`.
pub fn laplace_green_ball(domain: &BallDomain, x: &[f64], y: &[f64]) -> Result<f64> {
    domain.check_interior(x, "x")?;
    domain.check_interior(y, "y")?;
    let (xu, yu) = (domain.to_unit(x), domain.to_unit(y));
    let r = dist(&xu, &yu);
    if r == 0.0 {
        return Err(Error::invalid("Green's function needs distinct points"));
    }
    let n = domain.n;
    let kn = 1.0 / ((n as f64 - 2.0) * sphere_measure::<f64>(n)?);
    let e = 2.0 - n as f64;
    let g1 = kn * (r.powf(e) - image_distance2(&xu, &yu).powf(e / 2.0));
    Ok(domain.radius.powf(e) * g1)
}

/// Constant `c` in `Δ²_y|x−y|^{4−n} = c·δ_x`: `2(n−4)(n−2)|S^{n−1}|`.
pub fn navier_green_constant(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(2.0 * (nf - 4.0) * (nf - 2.0) * sphere_measure::<f64>(n)?)
}

/// `∫₀¹ t^{n/2−1} q_x(ty)^{(2−n)/2} dt` on the unit ball.
fn correction_integral(n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let xx = dot(x, x);
    let xy = dot(x, y);
    let yy = dot(y, y);
    let half_n = n as f64 / 2.0;
    integrate(
        |t: f64| {
            let q = xx * yy * t * t - 2.0 * t * xy + 1.0;
            t.powf(half_n - 1.0) * q.powf(1.0 - half_n)
        },
        0.0,
        1.0,
        &quad_cfg(),
    )
}

fn regular_part_unit(n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let nf = n as f64;
    let lead = image_distance2(x, y).powf((4.0 - nf) / 2.0);
    let yy = dot(y, y);
    let xx = dot(x, x);
    let corr = (yy - 1.0) * (4.0 - nf) * (1.0 - xx) / 2.0 * correction_integral(n, x, y)?;
    Ok(lead + corr)
}

/// `H(x, y) = |x−y|^{4−n} − G(x, y)` for the Navier Green's function `G`.
pub fn regular_part_h(domain: &BallDomain, x: &[f64], y: &[f64]) -> Result<f64> {
    domain.check_interior(x, "x")?;
    if y.len() != domain.n || norm(&domain.to_unit(y)) > 1.0 + 1e-12 {
        return Err(Error::OutsideDomain(format!("y = {y:?}")));
    }
    let h1 = regular_part_unit(domain.n, &domain.to_unit(x), &domain.to_unit(y))?;
    Ok(domain.radius.powf(4.0 - domain.n as f64) * h1)
}

/// Navier Green's function `G = |x−y|^{4−n} − H`.
pub fn navier_green(domain: &BallDomain, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::invalid("Green's function needs distinct points"));
    }
    Ok(r.powf(4.0 - domain.n as f64) - regular_part_h(domain, x, y)?)
}

/// `φ` on the unit ball as a function of `s = |x|²`.
fn robin_unit(n: usize, s: f64) -> Result<f64> {
    let nf = n as f64;
    let half_n = nf / 2.0;
    let i = integrate(
        |t: f64| t.powf(half_n - 1.0) * (1.0 - t * s).powf(2.0 - nf),
        0.0,
        1.0,
        &quad_cfg(),
    )?;
    Ok((1.0 - s).powf(4.0 - nf) + (nf - 4.0) * (1.0 - s).powi(2) / 2.0 * i)
}

/// `φ(x) = H(x, x)`.
pub fn robin_value(domain: &BallDomain, x: &[f64]) -> Result<f64> {
    domain.check_interior(x, "x")?;
    let u = domain.to_unit(x);
    Ok(domain.radius.powf(4.0 - domain.n as f64) * robin_unit(domain.n, dot(&u, &u))?)
}

/// Robin function with derivatives at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinEval {
    pub x: Vec<f64>,
    pub phi: f64,
    pub grad: Vec<f64>,
    /// Row-major symmetric Hessian estimate.
    pub hessian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub nondegenerate: bool,
    /// Threshold on `|eigenvalue|` used for `nondegenerate`.
    pub tolerance: f64,
}

impl RobinEval {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }
}

/// Relative step of the central differences for `∇φ`.
pub const GRAD_STEP: f64 = 1e-4;
/// Relative step of the second differences for the Hessian.
pub const HESS_STEP: f64 = 1e-3;
/// Eigenvalues above `NONDEGENERACY_TOL·R^{2−n}` in modulus count as nonzero.
pub const NONDEGENERACY_TOL: f64 = 1e-6;

/// `∇φ(x)` by central differences of `φ` along each axis.
pub fn robin_gradient(domain: &BallDomain, x: &[f64]) -> Result<Vec<f64>> {
    domain.check_interior(x, "x")?;
    let h = step(domain, x, GRAD_STEP)?;
    (0..domain.n)
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            Ok((robin_value(domain, &xp)? - robin_value(domain, &xm)?) / (2.0 * h))
        })
        .collect()
}

fn step(domain: &BallDomain, x: &[f64], rel: f64) -> Result<f64> {
    let d = domain.distance_to_boundary(x);
    let h = rel * d.min(domain.radius);
    if !(h > 1e-14 * domain.radius) {
        return Err(Error::TooCloseToBoundary { distance: d });
    }
    Ok(h)
}

/// `φ`, `∇φ` and a second-difference Hessian at `x`.
pub fn robin(domain: &BallDomain, x: &[f64]) -> Result<RobinEval> {
    domain.check_interior(x, "x")?;
    let n = domain.n;
    let phi = robin_value(domain, x)?;
    let grad = robin_gradient(domain, x)?;
    let h = step(domain, x, HESS_STEP)?;
    let at = |shifts: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in shifts {
            y[i] += s;
        }
        robin_value(domain, &y)
    };
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        hess[i][i] = (at(&[(i, h)])? - 2.0 * phi + at(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| hess[i][j]);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tolerance = NONDEGENERACY_TOL * domain.radius.powf(2.0 - n as f64);
    let nondegenerate = eigenvalues.iter().all(|e| e.abs() > tolerance);
    Ok(RobinEval {
        x: x.to_vec(),
        phi,
        grad,
        hessian: hess,
        eigenvalues,
        nondegenerate,
        tolerance,
    })
}

/// Damped Newton search for a critical point of `φ`, falling back to
/// steepest descent where the Hessian is not positive definite.
pub fn find_critical_point(domain: &BallDomain, seed: &[f64]) -> Result<RobinEval> {
    domain.check_interior(seed, "seed")?;
    if domain.distance_to_boundary(seed) < 0.05 * domain.radius {
        return Err(Error::invalid(
            "seed lies within 0.05·radius of the boundary",
        ));
    }
    let n = domain.n;
    let gtol = 1e-8 * domain.radius.powf(3.0 - n as f64);
    let mut x = seed.to_vec();
    for _ in 0..100 {
        let ev = robin(domain, &x)?;
        if ev.grad_norm() < gtol {
            return Ok(ev);
        }
        let hm = DMatrix::from_fn(n, n, |i, j| ev.hessian[i][j]);
        let g = nalgebra::DVector::from_column_slice(&ev.grad);
        let dir = match hm.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone() * (domain.radius.powi(2) / ev.phi.max(1e-300)),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(x, d)| x + t * d).collect();
            if domain.distance_to_boundary(&cand) > 0.01 * domain.radius {
                let phi_c = robin_value(domain, &cand)?;
                if phi_c <= ev.phi + 1e-4 * t * g.dot(&dir)
                    || t * dir.norm() < 1e-12 * domain.radius
                {
                    x = cand;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Minimization(format!(
                "line search failed at {x:?}; the descent path heads toward the boundary"
            )));
        }
        if domain.distance_to_boundary(&x) < 0.02 * domain.radius {
            return Err(Error::Minimization(
                "iterates diverge toward the boundary".into(),
            ));
        }
    }
    Err(Error::Minimization(
        "critical point search hit the iteration cap".into(),
    ))
}

/// One station of the boundary blow-up scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStation {
    pub distance: f64,
    pub phi: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBlowup {
    pub stations: Vec<BoundaryStation>,
    /// Exponent of `φ` against `d`; expected `4 − n`.
    pub phi_fit: SlopeFit<f64>,
    /// Exponent of `|∇φ|` against `d`; expected `3 − n`.
    pub grad_fit: SlopeFit<f64>,
}

/// Fits `φ` and `|∇φ|` against the distance to the boundary over 16
/// log-spaced stations with `d ∈ [0.02, 0.3]·R` on the first axis.
///
/// The fit carries a linear correction in `d`, since both quantities are
/// `C d^k (1 + O(d))` and the plain log-log slope is biased at `d ≈ 0.3`.
pub fn boundary_blowup_fit(domain: &BallDomain) -> Result<BoundaryBlowup> {
    let count = 16;
    let mut stations = Vec::with_capacity(count);
    for i in 0..count {
        let frac = 0.02 * (0.3f64 / 0.02).powf(i as f64 / (count - 1) as f64);
        let x = domain.point_on_axis(0, 1.0 - frac);
        let phi = robin_value(domain, &x)?;
        let grad = robin_gradient(domain, &x)?;
        stations.push(BoundaryStation {
            distance: frac * domain.radius,
            phi,
            grad_norm: norm(&grad),
        });
    }
    let ds: Vec<f64> = stations.iter().map(|s| s.distance).collect();
    let phis: Vec<f64> = stations.iter().map(|s| s.phi).collect();
    let grads: Vec<f64> = stations.iter().map(|s| s.grad_norm).collect();
    Ok(BoundaryBlowup {
        phi_fit: fit_loglog_corrected(&ds, &phis)?,
        grad_fit: fit_loglog_corrected(&ds, &grads)?,
        stations,
    })
}

/// Harmonic extension into the unit ball of boundary data `g(ζ₁)`,
/// evaluated at `y = (y₁, y₂, 0, …)`.
fn poisson_axisymmetric<G: Fn(f64) -> f64>(n: usize, g: &G, y1: f64, y2: f64) -> Result<f64> {
    let yy = y1 * y1 + y2 * y2;
    let surface = sphere_measure::<f64>(n)?;
    let nf = n as f64;
    let cfg = QuadConfig::with_rel_tol(1e-10);
    let v = sphere_integral_axisymmetric(
        n,
        |z1, z2| {
            let d2 = yy + 1.0 - 2.0 * (y1 * z1 + y2 * z2);
            g(z1) * d2.powf(-nf / 2.0)
        },
        &cfg,
    )?;
    Ok((1.0 - yy) / surface * v)
}

/// Number of Gauss–Legendre nodes in the `t`-integral of the second stage.
const STAGE_TWO_NODES: usize = 24;

/// Solves `Δ²θ = 0` in the unit ball with `θ = g0`, `Δθ = g1` on the sphere
/// for data depending on `ζ₁` only, at `y = (y₁, y₂, 0, …)`.
///
/// Stage one is the Poisson integral of `g1`, stage two adds the harmonic
/// extension of `g0` and the particular solution
/// `(|y|²−1)/4 · ∫₀¹ t^{n/2−1} P[g1](ty) dt`.
pub fn navier_dirichlet_ball<G0, G1>(n: usize, g0: G0, g1: G1, y1: f64, y2: f64) -> Result<f64>
where
    G0: Fn(f64) -> f64,
    G1: Fn(f64) -> f64,
{
    let yy = y1 * y1 + y2 * y2;
    if yy >= 1.0 {
        return Err(Error::OutsideDomain(format!("({y1}, {y2})")));
    }
    let harmonic = poisson_axisymmetric(n, &g0, y1, y2)?;
    let (nodes, weights) = gauss_legendre::<f64>(STAGE_TWO_NODES);
    let half_n = n as f64 / 2.0;
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        let t = 0.5 * (x + 1.0);
        acc += 0.5 * w * t.powf(half_n - 1.0) * poisson_axisymmetric(n, &g1, t * y1, t * y2)?;
    }
    Ok(harmonic + (yy - 1.0) / 4.0 * acc)
}
