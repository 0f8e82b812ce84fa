//! Finite-dimensional reduction around projected bubbles on a ball.
//!
//! For a bubble at the center of the ball every object is radial and all
//! inner products `(f, g) = ∫ ΔfΔg` reduce to one-dimensional quadratures.
//! The `∂_a` directions are odd and decouple from the radial ones, which
//! pins `ξ = a − x₀` to zero when `x₀` is the center.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bubble::{critical_exponent, BubbleParams, CriticalConstants, RadialBubble};
use crate::error::{Error, Result};
use crate::green_robin::{norm, robin, robin_gradient, robin_value, BallDomain};
use crate::numerics::{
    fit_loglog, fit_loglog_corrected, gauss_legendre, least_squares, radial_integral_scaled,
    sphere_measure, QuadConfig, RadialRange, SlopeFit,
};
use crate::projection::{ProjectedRadial, DEFAULT_MIN_LAMBDA_D};
use crate::solver::Decomposition;

fn quad() -> QuadConfig<f64> {
    QuadConfig::with_rel_tol(1e-12)
}

/// Rejects bubbles that are off-center or below the `λd` threshold.
fn centered_profile(params: &BubbleParams<f64>, domain: &BallDomain) -> Result<ProjectedRadial> {
    if params.n != domain.n {
        return Err(Error::invalid("bubble and domain dimensions differ"));
    }
    let off = params
        .a
        .iter()
        .zip(&domain.center)
        .map(|(a, c)| (a - c).powi(2))
        .sum::<f64>()
        .sqrt();
    if off > 1e-12 * domain.radius {
        return Err(Error::invalid(
            "the radial reduction needs the bubble at the ball center",
        ));
    }
    if params.lambda * domain.radius < DEFAULT_MIN_LAMBDA_D {
        return Err(Error::invalid(format!(
            "λ·d = {:.3} is below the expansion threshold {DEFAULT_MIN_LAMBDA_D}",
            params.lambda * domain.radius
        )));
    }
    ProjectedRadial::new(domain.n, params.lambda, domain.radius)
}

fn ball_integral<F: Fn(f64) -> f64>(pr: &ProjectedRadial, f: F) -> Result<f64> {
    radial_integral_scaled(
        pr.bubble.n,
        f,
        RadialRange::Finite(pr.radius),
        1.0 / pr.lambda(),
        &quad(),
    )
}

/// Gram matrix of `{Pδ, ∂_λPδ, ∂_{a_1}Pδ, …, ∂_{a_n}Pδ}` for a centered bubble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormMatrix {
    pub n: usize,
    pub lambda: f64,
    /// Symmetric, in the basis order above.
    pub entries: Vec<Vec<f64>>,
    /// `‖Pδ‖²`, tends to `c̄₁`.
    pub cbar1: f64,
    /// `λ²‖∂_λPδ‖²`, tends to `c̄₂`.
    pub cbar2: f64,
    /// `‖∂_{a_i}Pδ‖²/λ²`, tends to `c̄₃`.
    pub cbar3: f64,
}

pub fn gram_matrix(params: &BubbleParams<f64>, domain: &BallDomain) -> Result<NormMatrix> {
    let pr = centered_profile(params, domain)?;
    let n = domain.n;
    let lambda = params.lambda;
    let pp = ball_integral(&pr, |r| pr.laplacian(r).powi(2))?;
    let pl = ball_integral(&pr, |r| pr.laplacian(r) * pr.lambda_dlambda_laplacian(r))? / lambda;
    let ll = ball_integral(&pr, |r| pr.lambda_dlambda_laplacian(r).powi(2))? / (lambda * lambda);
    // (∂_{a_i}, ∂_{a_j}) = δ_ij/n ∫ F(r)² r² with Δ∂_{a_i}Pδ = F(r) x_i.
    let aa = ball_integral(&pr, |r| (pr.da_laplacian_factor(r) * r).powi(2))? / n as f64;
    let mut entries = vec![vec![0.0; n + 2]; n + 2];
    entries[0][0] = pp;
    entries[0][1] = pl;
    entries[1][0] = pl;
    entries[1][1] = ll;
    for i in 2..n + 2 {
        entries[i][i] = aa;
    }
    Ok(NormMatrix {
        n,
        lambda,
        entries,
        cbar1: pp,
        cbar2: ll * lambda * lambda,
        cbar3: aa / (lambda * lambda),
    })
}

/// Gram matrices along a `λ` sweep with the leading constants extrapolated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramFit {
    pub lambdas: Vec<f64>,
    pub matrices: Vec<NormMatrix>,
    /// Limits of `‖Pδ‖²`, `λ²‖∂_λPδ‖²`, `‖∂_aPδ‖²/λ²` from fits `c + bλ^{4−n}`.
    pub cbar1: f64,
    pub cbar2: f64,
    pub cbar3: f64,
    /// `|(Pδ, ∂_λPδ)|` against `λ`.
    pub cross_fit: SlopeFit<f64>,
    /// `|(Pδ, ∂_λPδ)|/√(‖Pδ‖²‖∂_λPδ‖²)` against `λ`.
    pub cross_ratio_fit: SlopeFit<f64>,
}

pub fn gram_fit(lambdas: &[f64], domain: &BallDomain) -> Result<GramFit> {
    if lambdas.len() < 4 {
        return Err(Error::invalid("Gram fit needs at least 4 scales"));
    }
    let matrices = lambdas
        .iter()
        .map(|&l| gram_matrix(&BubbleParams::new(domain.center.clone(), l)?, domain))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = lambdas
        .iter()
        .map(|l| (l * domain.radius).powf(4.0 - domain.n as f64))
        .collect();
    let limit = |f: fn(&NormMatrix) -> f64| -> Result<f64> {
        let y: Vec<f64> = matrices.iter().map(f).collect();
        Ok(least_squares(&x, &y)?.1)
    };
    let cross: Vec<f64> = matrices.iter().map(|m| m.entries[0][1].abs()).collect();
    let ratio: Vec<f64> = matrices
        .iter()
        .map(|m| m.entries[0][1].abs() / (m.entries[0][0] * m.entries[1][1]).sqrt())
        .collect();
    Ok(GramFit {
        lambdas: lambdas.to_vec(),
        cbar1: limit(|m| m.cbar1)?,
        cbar2: limit(|m| m.cbar2)?,
        cbar3: limit(|m| m.cbar3)?,
        cross_fit: fit_loglog(lambdas, &cross)?,
        cross_ratio_fit: fit_loglog(lambdas, &ratio)?,
        matrices,
    })
}

/// Smallest Rayleigh quotients of `Q₀(v, v) = ‖v‖² − p∫δ^{p−1}v²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coercivity {
    pub lambda: f64,
    pub trial_count: usize,
    /// Over trials orthogonal to `Pδ` and `λ∂_λPδ`.
    pub min_quotient: f64,
    /// Over all trials satisfying the boundary conditions.
    pub unconstrained_min: f64,
    /// `Q₀(Pδ, Pδ)/‖Pδ‖²`.
    pub pdelta_quotient: f64,
    /// Trial directions dropped as numerically dependent.
    pub dropped: usize,
}

/// Chebyshev values and first two derivatives of `T_0 … T_{m}` at `t`.
fn chebyshev(m: usize, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; m + 1];
    let mut d = vec![0.0; m + 1];
    let mut dd = vec![0.0; m + 1];
    v[0] = 1.0;
    if m >= 1 {
        v[1] = t;
        d[1] = 1.0;
    }
    for k in 1..m {
        v[k + 1] = 2.0 * t * v[k] - v[k - 1];
        d[k + 1] = 2.0 * v[k] + 2.0 * t * d[k] - d[k - 1];
        dd[k + 1] = 4.0 * d[k] + 2.0 * t * dd[k] - dd[k - 1];
    }
    (v, d, dd)
}

/// Rayleigh–Ritz estimate of the coercivity constant of `Q₀` on radial
/// functions with `v = Δv = 0` on the boundary.
///
/// Trials are `T_{2k}(t)`, `k < trial_count`, in `t = asinh(λr)/asinh(λR)`,
/// which are smooth and even in `r` and resolve the bubble scale. The
/// boundary conditions and the orthogonality to `Pδ`, `λ∂_λPδ` enter as
/// linear constraints on the coefficients.
pub fn coercivity_check(
    params: &BubbleParams<f64>,
    domain: &BallDomain,
    trial_count: usize,
) -> Result<Coercivity> {
    let pr = centered_profile(params, domain)?;
    if trial_count < 8 {
        return Err(Error::invalid(
            "coercivity check needs at least 8 trial functions",
        ));
    }
    let n = domain.n;
    let nf = n as f64;
    let lambda = params.lambda;
    let radius = domain.radius;
    let p: f64 = critical_exponent(n)?;
    let bubble = RadialBubble::new(n, lambda)?;
    let big_l = (lambda * radius).asinh();
    let k = trial_count;
    let deg = 2 * (k - 1);
    let surface: f64 = sphere_measure(n)?;

    // Values and Laplacians of the trials at composite Gauss nodes in t.
    let (gx, gw) = gauss_legendre::<f64>(16);
    let panels = k.max(64);
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DMatrix::<f64>::zeros(k, k);
    let mut g = DMatrix::<f64>::zeros(2, k);
    let trial = |t: f64, r: f64| {
        let (v, d, dd) = chebyshev(deg, t);
        let s = (1.0 + lambda * lambda * r * r).sqrt();
        let tp = lambda / (big_l * s);
        let tpp = -lambda.powi(3) * r / (big_l * s.powi(3));
        let vals: Vec<f64> = (0..k).map(|j| v[2 * j]).collect();
        let laps: Vec<f64> = (0..k)
            .map(|j| dd[2 * j] * tp * tp + d[2 * j] * (tpp + (nf - 1.0) * tp / r))
            .collect();
        (vals, laps)
    };
    for panel in 0..panels {
        let (t0, t1) = (
            panel as f64 / panels as f64,
            (panel + 1) as f64 / panels as f64,
        );
        for (x, w) in gx.iter().zip(&gw) {
            let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * x;
            let r = (big_l * t).sinh() / lambda;
            let drdt = big_l * (big_l * t).cosh() / lambda;
            let mass = 0.5 * (t1 - t0) * w * drdt * surface * r.powi(n as i32 - 1);
            let (vals, laps) = trial(t, r);
            let pot = p * bubble.value(r).powf(p - 1.0);
            let e = [pr.laplacian(r), pr.lambda_dlambda_laplacian(r)];
            for i in 0..k {
                for j in 0..=i {
                    a[(i, j)] += mass * laps[i] * laps[j];
                    b[(i, j)] += mass * pot * vals[i] * vals[j];
                }
                for (c, ec) in e.iter().enumerate() {
                    g[(c, i)] += mass * laps[i] * ec;
                }
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
            b[(j, i)] = b[(i, j)];
        }
    }

    // Boundary rows: v(R) = Σc_j and Δv(R) from T_m(1) = 1, T'_m(1) = m²,
    // T''_m(1) = m²(m²−1)/3.
    let s = (1.0 + lambda * lambda * radius * radius).sqrt();
    let tp = lambda / (big_l * s);
    let tpp = -lambda.powi(3) * radius / (big_l * s.powi(3));
    let mut bc = DMatrix::<f64>::zeros(2, k);
    for j in 0..k {
        let m2 = (2 * j) as f64 * (2 * j) as f64;
        bc[(0, j)] = 1.0;
        bc[(1, j)] = m2 * (m2 - 1.0) / 3.0 * tp * tp + m2 * (tpp + (nf - 1.0) * tp / radius);
    }

    let mut dropped = 0;
    let constrained = min_quotient(&a, &b, &stack(&bc, &g), &mut dropped)?;
    let mut ignore = 0;
    let unconstrained = min_quotient(&a, &b, &bc, &mut ignore)?;

    let pp = ball_integral(&pr, |r| pr.laplacian(r).powi(2))?;
    let pot = ball_integral(&pr, |r| {
        p * bubble.value(r).powf(p - 1.0) * pr.value(r).powi(2)
    })?;
    Ok(Coercivity {
        lambda,
        trial_count,
        min_quotient: constrained,
        unconstrained_min: unconstrained,
        pdelta_quotient: (pp - pot) / pp,
        dropped,
    })
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    m.rows_mut(0, top.nrows()).copy_from(top);
    m.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    m
}

/// Smallest eigenvalue of `(A − B)c = μAc` on the null space of `constraints`.
fn min_quotient(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    constraints: &DMatrix<f64>,
    dropped: &mut usize,
) -> Result<f64> {
    let k = a.ncols();
    let mut c = constraints.clone();
    for mut row in c.row_iter_mut() {
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    // Null space of the constraints from the eigenvectors of CᵀC.
    let ctc = SymmetricEigen::new(c.transpose() * &c);
    let cols: Vec<usize> = (0..k).filter(|&i| ctc.eigenvalues[i] < 1e-10).collect();
    if cols.len() + c.nrows() != k {
        return Err(Error::invalid("trial constraints are linearly dependent"));
    }
    let z = DMatrix::from_fn(k, cols.len(), |i, j| ctc.eigenvectors[(i, cols[j])]);
    let m = z.transpose() * a * &z;
    let q = z.transpose() * (a - b) * &z;
    // Whiten the energy form, discarding numerically dependent directions.
    let me = SymmetricEigen::new(m);
    let top = me.eigenvalues.iter().fold(0.0f64, |s, v| s.max(*v));
    let keep: Vec<usize> = (0..me.eigenvalues.len())
        .filter(|&i| me.eigenvalues[i] > 1e-13 * top)
        .collect();
    *dropped = me.eigenvalues.len() - keep.len();
    if keep.is_empty() {
        return Err(Error::invalid("trial basis is degenerate"));
    }
    let w = DMatrix::from_fn(me.eigenvalues.len(), keep.len(), |i, j| {
        me.eigenvectors[(i, keep[j])] / me.eigenvalues[keep[j]].sqrt()
    });
    let qe = SymmetricEigen::new(w.transpose() * q * &w);
    Ok(qe.eigenvalues.iter().fold(f64::INFINITY, |s, v| s.min(*v)))
}

/// Leading `λ`-balance `c₂ε − c₁φ(a)/λ^{n−4}`.
pub fn balance_residual_a(
    eps: f64,
    a: &[f64],
    lambda: f64,
    domain: &BallDomain,
    consts: &CriticalConstants<f64>,
) -> Result<f64> {
    check_balance_args(eps, a, lambda, domain)?;
    let phi = robin_value(domain, a)?;
    Ok(consts.c2 * eps - consts.c1 * phi / lambda.powf(domain.n as f64 - 4.0))
}

fn check_balance_args(eps: f64, a: &[f64], lambda: f64, domain: &BallDomain) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.2) {
        return Err(Error::invalid(format!("ε = {eps} outside (0, 0.2]")));
    }
    check_scale(a, lambda, domain)
}

fn check_scale(a: &[f64], lambda: f64, domain: &BallDomain) -> Result<()> {
    if lambda * domain.distance_to_boundary(a) < DEFAULT_MIN_LAMBDA_D {
        return Err(Error::invalid(format!(
            "λ·d = {:.3} is below the expansion threshold {DEFAULT_MIN_LAMBDA_D}",
            lambda * domain.distance_to_boundary(a)
        )));
    }
    Ok(())
}

/// Root `λ* = (c₁φ(a)/(c₂ε))^{1/(n−4)}` of the leading balance.
pub fn lambda_star(
    eps: f64,
    a: &[f64],
    domain: &BallDomain,
    consts: &CriticalConstants<f64>,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    let phi = robin_value(domain, a)?;
    Ok((consts.c1 * phi / (consts.c2 * eps)).powf(1.0 / (domain.n as f64 - 4.0)))
}

/// Coefficient of the concentration-point balance. The expansion of the
/// reduced energy gives `(c₁/2)·∇φ(a)/λ^{n−4}` for the `a`-gradient; with
/// `∂H/∂a(a, a) = ∇φ(a)/2` this is `c₃ = c₁/2` in the `λ^{3−n}` scaling.
pub fn c3(consts: &CriticalConstants<f64>) -> f64 {
    0.5 * consts.c1
}

/// `c₃λ^{3−n}∂H/∂a(a, a)`, the concentration-point balance.
pub fn balance_residual_b(
    a: &[f64],
    lambda: f64,
    domain: &BallDomain,
    consts: &CriticalConstants<f64>,
) -> Result<Vec<f64>> {
    check_scale(a, lambda, domain)?;
    let grad = robin_gradient(domain, a)?;
    let scale = c3(consts) * lambda.powf(3.0 - domain.n as f64) * 0.5;
    Ok(grad.into_iter().map(|g| scale * g).collect())
}

/// Lagrange multipliers of `∇I_ε(αPδ) = A Pδ + B ∂_λPδ + Σ C_i ∂_{a_i}Pδ`
/// on the span of the bubble directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Multipliers {
    pub a: f64,
    pub b: f64,
    pub c: Vec<f64>,
}

/// Fixed point of the reduced system at `x₀`.
///
/// `β = α − α₀` with `α₀ = S^{−n/8}` is the amplitude in the normalization of
/// the scale-invariant quotient; `amplitude = α/α₀` is the matching factor
/// for solutions of the equation itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedState {
    pub eps: f64,
    pub beta: f64,
    pub rho: f64,
    pub xi: Vec<f64>,
    pub multipliers: Multipliers,
    pub amplitude: f64,
    pub lambda: f64,
    /// Largest ratio of successive step lengths.
    pub contraction_ratio: f64,
    pub iterations: usize,
    /// Step lengths `‖X_{k+1} − X_k‖∞`.
    pub history: Vec<f64>,
    /// `balance_residual_a/ε` at the fixed point.
    pub balance_a_over_eps: f64,
    /// `ελ^{n−4}` at the fixed point.
    pub eps_lambda: f64,
}

struct ReducedMap<'a> {
    pr_n: usize,
    radius: f64,
    q: f64,
    phi: f64,
    eps: f64,
    alpha0: f64,
    consts: &'a CriticalConstants<f64>,
}

impl ReducedMap<'_> {
    fn lambda(&self, rho: f64) -> Result<f64> {
        let base = self.phi.powf(-0.5) + rho;
        if !(base > 0.0) {
            return Err(Error::NoContraction(format!(
                "ρ = {rho} leaves the admissible range"
            )));
        }
        let k = (self.pr_n as f64 - 4.0) / 2.0;
        Ok(((self.consts.c2 / self.consts.c1).sqrt() * base * self.eps.sqrt()).powf(-1.0 / k))
    }

    /// Multipliers `(A, B̃)` for the basis `(Pδ, λ∂_λPδ)`.
    fn multipliers(&self, beta: f64, rho: f64) -> Result<(f64, f64, f64)> {
        let lambda = self.lambda(rho)?;
        let amp = 1.0 + beta / self.alpha0;
        if !(amp > 0.0) {
            return Err(Error::NoContraction(format!(
                "β = {beta} gives a non-positive amplitude"
            )));
        }
        let pr = ProjectedRadial::new(self.pr_n, lambda, self.radius)?;
        let q = self.q;
        let g11 = ball_integral(&pr, |r| pr.laplacian(r).powi(2))?;
        let g12 = ball_integral(&pr, |r| pr.laplacian(r) * pr.lambda_dlambda_laplacian(r))?;
        let g22 = ball_integral(&pr, |r| pr.lambda_dlambda_laplacian(r).powi(2))?;
        let i1 = ball_integral(&pr, |r| pr.value(r).max(0.0).powf(q + 1.0))?;
        let i2 = ball_integral(&pr, |r| pr.value(r).max(0.0).powf(q) * pr.lambda_dlambda(r))?;
        let aq = amp.powf(q);
        let f1 = amp * g11 - aq * i1;
        let f2 = amp * g12 - aq * i2;
        let det = g11 * g22 - g12 * g12;
        Ok((
            (f1 * g22 - f2 * g12) / det,
            (g11 * f2 - g12 * f1) / det,
            lambda,
        ))
    }
}

/// Solves the reduced system for `(β, ρ, ξ)` at `x₀` by a chord iteration.
///
/// The reduced equations are `A = B = 0` for the multipliers of
/// `∇I_ε(αPδ_{x₀,λ})`, where `I_ε(u) = ½‖u‖² − ∫u^{p+1−ε}/(p+1−ε)` and
/// `λ^{−(n−4)/2} = √(c₂/c₁)(φ(x₀)^{−1/2} + ρ)√ε`. The map
/// `X ↦ X − J₀⁻¹(A, B̃)(X)` with `J₀` the Jacobian at `X = 0` is iterated to
/// a fixed point; it certifies contraction when the ratio of successive
/// steps stays below one.
pub fn solve_e3(
    eps: f64,
    x0: &[f64],
    domain: &BallDomain,
    consts: &CriticalConstants<f64>,
) -> Result<ReducedState> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::invalid(format!("ε = {eps} outside (0, 0.1]")));
    }
    let eval = robin(domain, x0)?;
    let gscale = domain.radius.powf(3.0 - domain.n as f64);
    if eval.grad_norm() > 1e-6 * gscale || !eval.nondegenerate {
        return Err(Error::invalid(
            "x₀ is not a nondegenerate critical point of φ",
        ));
    }
    let off = norm(
        &x0.iter()
            .zip(&domain.center)
            .map(|(x, c)| x - c)
            .collect::<Vec<_>>(),
    );
    if off > 1e-8 * domain.radius {
        return Err(Error::invalid(
            "the reduced system is solved in the radial class, with x₀ at the center",
        ));
    }
    let n = domain.n;
    let map = ReducedMap {
        pr_n: n,
        radius: domain.radius,
        q: critical_exponent::<f64>(n)? - eps,
        phi: eval.phi,
        eps,
        alpha0: consts.s.powf(-(n as f64) / 8.0),
        consts,
    };
    let h = 1e-5;
    let col = |db: f64, dr: f64| -> Result<[f64; 2]> {
        let (ap, bp, _) = map.multipliers(db, dr)?;
        let (am, bm, _) = map.multipliers(-db, -dr)?;
        Ok([(ap - am) / (2.0 * h), (bp - bm) / (2.0 * h)])
    };
    let jb = col(h, 0.0)?;
    let jr = col(0.0, h)?;
    let det = jb[0] * jr[1] - jr[0] * jb[1];
    if !(det.abs() > 0.0) {
        return Err(Error::Singular(0));
    }
    let (mut beta, mut rho) = (0.0, 0.0);
    let mut history = Vec::new();
    let mut ratio = 0.0f64;
    let mut last = None;
    for it in 1..=100 {
        let (fa, fb, _) = map.multipliers(beta, rho)?;
        let db = (fa * jr[1] - jr[0] * fb) / det;
        let dr = (jb[0] * fb - fa * jb[1]) / det;
        beta -= db;
        rho -= dr;
        let step = db.abs().max(dr.abs());
        if let Some(prev) = last {
            // Ratios below the quadrature noise say nothing about the map.
            if prev > 1e-9 {
                ratio = ratio.max(step / prev);
            }
        }
        last = Some(step);
        history.push(step);
        if ratio >= 1.0 {
            return Err(Error::NoContraction(format!(
                "ε = {eps}: step ratio {ratio:.3} ≥ 1, steps {history:?}"
            )));
        }
        if step < 1e-11 {
            let (fa, fb, lambda_new) = map.multipliers(beta, rho)?;
            let k = (n as f64 - 4.0) / 2.0;
            let eps_lambda = eps * lambda_new.powf(2.0 * k);
            return Ok(ReducedState {
                eps,
                beta,
                rho,
                xi: vec![0.0; n],
                multipliers: Multipliers {
                    a: fa,
                    b: fb * lambda_new,
                    c: vec![0.0; n],
                },
                amplitude: 1.0 + beta / map.alpha0,
                lambda: lambda_new,
                contraction_ratio: ratio,
                iterations: it,
                history,
                balance_a_over_eps: (consts.c2 * eps
                    - consts.c1 * eval.phi / lambda_new.powf(2.0 * k))
                    / eps,
                eps_lambda,
            });
        }
    }
    Err(Error::NoContraction(format!(
        "ε = {eps}: no convergence in 100 steps, steps {history:?}"
    )))
}

/// Running bound constant `K_j = max_{i≤j} |x_i|/g(ε_i)` along a sweep of
/// decreasing `ε`; the bound `|x| ≤ Kg(ε)` is stable when `K` stops growing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConstant {
    pub ratios: Vec<f64>,
    pub running: Vec<f64>,
    /// `K_last/K_first`.
    pub growth: f64,
}

pub fn bound_constant(values: &[f64], gauge: &[f64]) -> Result<BoundConstant> {
    if values.len() != gauge.len() || values.is_empty() {
        return Err(Error::invalid(
            "bound constant needs matching, non-empty inputs",
        ));
    }
    let ratios: Vec<f64> = values.iter().zip(gauge).map(|(v, g)| v.abs() / g).collect();
    let mut running = Vec::with_capacity(ratios.len());
    let mut k = 0.0f64;
    for r in &ratios {
        k = k.max(*r);
        running.push(k);
    }
    let growth = running[running.len() - 1] / running[0];
    Ok(BoundConstant {
        ratios,
        running,
        growth,
    })
}

/// One point of a subcritical sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub decomposition: Decomposition,
}

/// Least-squares limit `y(ε) ≈ L + b·g(ε)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extrapolation {
    /// `"eps"` for `g = ε`, `"eps_log"` for `g = ε log(1/ε)`.
    pub model: String,
    pub limit: f64,
    pub slope: f64,
    pub rms: f64,
}

fn extrapolate(eps: &[f64], y: &[f64]) -> Result<[Extrapolation; 2]> {
    let lin: Vec<f64> = eps.to_vec();
    let log: Vec<f64> = eps.iter().map(|e| e * (1.0 / e).ln()).collect();
    let fit = |g: &[f64], model: &str| -> Result<Extrapolation> {
        let (slope, limit, rms) = least_squares(g, y)?;
        Ok(Extrapolation {
            model: model.into(),
            limit,
            slope,
            rms,
        })
    };
    Ok([fit(&lin, "eps")?, fit(&log, "eps_log")?])
}

/// Comparison of the extrapolated limits with one `c₂` convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConventionCheck {
    pub convention: String,
    pub c2: f64,
    /// `(c₁c₀²/c₂)φ(x₀)`.
    pub target_eps_m2: f64,
    /// `(c₁/c₂)φ(x₀)`.
    pub target_eps_lambda: f64,
    /// Relative errors of the two extrapolation models, in model order.
    pub rel_err_eps_m2: Vec<f64>,
    pub rel_err_eps_lambda: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerdictTolerances {
    pub limit_rel: f64,
    pub ratio_band: (f64, f64),
    pub m_pow_eps_band: (f64, f64),
    pub alpha_tol: f64,
    /// Number of smallest-ε points used by the extrapolation.
    pub fit_points: usize,
}

impl Default for VerdictTolerances {
    fn default() -> Self {
        Self {
            limit_rel: 0.15,
            ratio_band: (0.9, 1.1),
            m_pow_eps_band: (0.95, 1.05),
            alpha_tol: 0.05,
            fit_points: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub n: usize,
    pub phi: f64,
    pub eps: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eps_m2: Vec<f64>,
    /// `ελ^{n−4}`.
    pub eps_lambda: Vec<f64>,
    /// `M/(c₀λ^{(n−4)/2})`.
    pub m_over_c0_lambda: Vec<f64>,
    pub m_pow_eps: Vec<f64>,
    pub extrapolated_eps_m2: Vec<Extrapolation>,
    pub extrapolated_eps_lambda: Vec<Extrapolation>,
    pub conventions: Vec<ConventionCheck>,
    /// Convention that passes, if any.
    pub operative: Option<String>,
    pub ratio_ok: bool,
    pub m_pow_eps_ok: bool,
    pub alpha_ok: bool,
    pub tolerances: VerdictTolerances,
    pub pass: bool,
}

/// Compares a subcritical sweep with the blow-up law at `x₀`.
///
/// Both extrapolation models must land within tolerance for a convention to
/// pass.
pub fn blowup_verdict(
    sweep: &[SweepPoint],
    x0: &[f64],
    domain: &BallDomain,
    consts: &CriticalConstants<f64>,
    tol: VerdictTolerances,
) -> Result<BlowupVerdict> {
    if sweep.len() < 4 || tol.fit_points < 3 {
        return Err(Error::invalid(
            "blow-up verdict needs at least 4 sweep points",
        ));
    }
    if sweep.windows(2).any(|w| !(w[1].eps < w[0].eps)) {
        return Err(Error::invalid("sweep must be ordered by decreasing ε"));
    }
    let n = domain.n;
    let k = (n as f64 - 4.0) / 2.0;
    let phi = robin_value(domain, x0)?;
    let eps: Vec<f64> = sweep.iter().map(|s| s.eps).collect();
    let m: Vec<f64> = sweep.iter().map(|s| s.m).collect();
    let lambda: Vec<f64> = sweep.iter().map(|s| s.decomposition.lambda).collect();
    let alpha: Vec<f64> = sweep.iter().map(|s| s.decomposition.alpha).collect();
    let eps_m2: Vec<f64> = eps.iter().zip(&m).map(|(e, m)| e * m * m).collect();
    let eps_lambda: Vec<f64> = eps
        .iter()
        .zip(&lambda)
        .map(|(e, l)| e * l.powf(2.0 * k))
        .collect();
    let ratio: Vec<f64> = m
        .iter()
        .zip(&lambda)
        .map(|(m, l)| m / (consts.c0 * l.powf(k)))
        .collect();
    let m_pow_eps: Vec<f64> = m.iter().zip(&eps).map(|(m, e)| m.powf(*e)).collect();

    let tail = tol.fit_points.min(sweep.len());
    let from = sweep.len() - tail;
    let ext_m2 = extrapolate(&eps[from..], &eps_m2[from..])?;
    let ext_l = extrapolate(&eps[from..], &eps_lambda[from..])?;
    let conventions: Vec<ConventionCheck> = [("thm", consts.c2_thm), ("e34", consts.c2_e34)]
        .iter()
        .map(|&(name, c2)| {
            let tm = consts.c1 * consts.c0 * consts.c0 / c2 * phi;
            let tl = consts.c1 / c2 * phi;
            let em: Vec<f64> = ext_m2
                .iter()
                .map(|x| (x.limit - tm).abs() / tm.abs())
                .collect();
            let el: Vec<f64> = ext_l
                .iter()
                .map(|x| (x.limit - tl).abs() / tl.abs())
                .collect();
            let pass = c2 > 0.0 && em.iter().chain(&el).all(|e| *e <= tol.limit_rel);
            ConventionCheck {
                convention: name.into(),
                c2,
                target_eps_m2: tm,
                target_eps_lambda: tl,
                rel_err_eps_m2: em,
                rel_err_eps_lambda: el,
                pass,
            }
        })
        .collect();
    let operative = conventions
        .iter()
        .find(|c| c.pass)
        .map(|c| c.convention.clone());
    let last = sweep.len() - 1;
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    let ratio_ok = within(ratio[last], tol.ratio_band);
    let m_pow_eps_ok = within(m_pow_eps[last], tol.m_pow_eps_band);
    let alpha_ok = (alpha[last] - 1.0).abs() < tol.alpha_tol;
    let pass = operative.is_some() && ratio_ok && m_pow_eps_ok && alpha_ok;
    Ok(BlowupVerdict {
        n,
        phi,
        eps,
        m,
        lambda,
        alpha,
        eps_m2,
        eps_lambda,
        m_over_c0_lambda: ratio,
        m_pow_eps,
        extrapolated_eps_m2: ext_m2.to_vec(),
        extrapolated_eps_lambda: ext_l.to_vec(),
        conventions,
        operative,
        ratio_ok,
        m_pow_eps_ok,
        alpha_ok,
        tolerances: tol,
        pass,
    })
}

/// Scan of the supercritical balance at one `ε`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstructionEntry {
    pub eps: f64,
    /// Minimum of `c₁φ(a)/λ^{n−4} + c₂ε` over the scan.
    pub min_balance: f64,
    /// Axis coordinate of `a − center` and `λ` at the minimum.
    pub argmin_a: f64,
    pub argmin_lambda: f64,
    /// `min_balance/(c₂ε)`.
    pub margin_ratio: f64,
    pub positive: bool,
    /// Root of the subcritical balance at the center.
    pub subcritical_root: f64,
    /// Whether `c₂ε − c₁φ(center)/λ^{n−4}` changes sign over the `λ` range.
    pub subcritical_sign_change: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Obstruction {
    pub c1: f64,
    pub c2: f64,
    pub lambda_range: (f64, f64),
    pub lambda_samples: usize,
    /// Axis coordinates of the scanned concentration points.
    pub stations: Vec<f64>,
    pub entries: Vec<ObstructionEntry>,
    /// `c₁φ(a)` against `d(a, ∂Ω)` near the boundary.
    pub boundary_fit: SlopeFit<f64>,
    pub all_positive: bool,
    pub all_margins: bool,
}

pub const OBSTRUCTION_LAMBDA_RANGE: (f64, f64) = (5.0, 1e4);

/// Certifies that the supercritical balance `c₁φ(a)/λ^{n−4} + c₂ε` has no
/// zero over `λ ∈ [5, 10⁴]` and `a` on a diameter, and that its subcritical
/// counterpart does.
pub fn supercritical_obstruction(
    eps_list: &[f64],
    domain: &BallDomain,
    consts: &CriticalConstants<f64>,
) -> Result<Obstruction> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("ε schedule must be positive and non-empty"));
    }
    if !(consts.c1 > 0.0 && consts.c2 > 0.0) {
        return Err(Error::invalid("obstruction needs c₁ > 0 and c₂ > 0"));
    }
    let n = domain.n;
    let (lo, hi) = OBSTRUCTION_LAMBDA_RANGE;
    let samples = 201;
    let lambdas: Vec<f64> = (0..samples)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (samples - 1) as f64).exp())
        .collect();
    // Uniform stations on (−R, R) plus a geometric cluster toward one end.
    let mut stations: Vec<f64> = (-49..=49)
        .map(|i| domain.radius * i as f64 / 50.0)
        .collect();
    stations.extend((1..=10).map(|j| domain.radius * (1.0 - 0.02 * 0.7f64.powi(j))));
    stations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let phis = stations
        .iter()
        .map(|&t| robin_value(domain, &domain.point_on_axis(0, t)))
        .collect::<Result<Vec<_>>>()?;
    let center_phi = robin_value(domain, &domain.center)?;
    let powk = n as f64 - 4.0;
    let entries: Vec<ObstructionEntry> = eps_list
        .iter()
        .map(|&eps| {
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for (&t, &phi) in stations.iter().zip(&phis) {
                for &l in &lambdas {
                    let v = consts.c1 * phi / l.powf(powk) + consts.c2 * eps;
                    if v < best.0 {
                        best = (v, t, l);
                    }
                }
            }
            let sub = |l: f64| consts.c2 * eps - consts.c1 * center_phi / l.powf(powk);
            ObstructionEntry {
                eps,
                min_balance: best.0,
                argmin_a: best.1,
                argmin_lambda: best.2,
                margin_ratio: best.0 / (consts.c2 * eps),
                positive: best.0 > 0.0,
                subcritical_root: (consts.c1 * center_phi / (consts.c2 * eps)).powf(1.0 / powk),
                subcritical_sign_change: sub(lo) < 0.0 && sub(hi) > 0.0,
            }
        })
        .collect();
    let ds: Vec<f64> = (0..16)
        .map(|j| domain.radius * 0.02 * (15f64).powf(j as f64 / 15.0))
        .collect();
    let hterm = ds
        .iter()
        .map(|&d| Ok(consts.c1 * robin_value(domain, &domain.point_on_axis(0, domain.radius - d))?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Obstruction {
        c1: consts.c1,
        c2: consts.c2,
        lambda_range: (lo, hi),
        lambda_samples: samples,
        all_positive: entries.iter().all(|e| e.positive),
        all_margins: entries.iter().all(|e| e.margin_ratio >= 1.0),
        boundary_fit: fit_loglog_corrected(&ds, &hterm)?,
        stations,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::balance_constants;

    fn unit() -> BallDomain {
        BallDomain::unit(6).unwrap()
    }

    #[test]
    fn chebyshev_derivatives_at_one() {
        let (v, d, dd) = chebyshev(10, 1.0);
        for m in 0..=10 {
            let m2 = (m * m) as f64;
            assert!((v[m] - 1.0).abs() < 1e-12);
            assert!((d[m] - m2).abs() < 1e-9);
            assert!((dd[m] - m2 * (m2 - 1.0) / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn gram_is_quasi_diagonal() {
        let d = unit();
        let g = gram_matrix(&BubbleParams::centered(6, 20.0).unwrap(), &d).unwrap();
        let c = balance_constants::<f64>(6).unwrap();
        assert!((g.cbar1 - c.s_n4).abs() / c.s_n4 < 0.01);
        assert!(g.entries[0][1].abs() < 1e-2 * (g.entries[0][0] * g.entries[1][1]).sqrt());
        assert!(g.cbar2 > 0.0 && g.cbar3 > 0.0);
    }

    #[test]
    fn lambda_star_is_root() {
        let d = unit();
        let c = balance_constants::<f64>(6).unwrap();
        let eps = 0.05;
        let l = lambda_star(eps, &d.center, &d, &c).unwrap();
        let r = balance_residual_a(eps, &d.center, l, &d, &c).unwrap();
        assert!(r.abs() < 1e-12 * c.c2 * eps);
    }

    #[test]
    fn balance_b_vanishes_at_center() {
        let d = unit();
        let c = balance_constants::<f64>(6).unwrap();
        let r = balance_residual_b(&d.center, 30.0, &d, &c).unwrap();
        assert!(norm(&r) < 1e-9);
    }
}
