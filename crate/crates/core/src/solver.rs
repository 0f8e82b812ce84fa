//! Radial Newton continuation for `Δ²u = u^{p∓ε}` with `u = Δu = 0` on a
//! ball, and the decomposition `u = αPδ_{0,λ} + v`.
//!
//! The two fields `u` and `w = Δu` are unknowns on a sinh-stretched radial
//! grid. `Δ` is the finite-volume operator with faces at the node midpoints:
//! it is symmetric for the cell-volume inner product, reproduces `Δr² = 2n`
//! exactly, and makes `Σ mᵢwᵢ² = Σ mᵢuᵢ^{q+1}` an exact discrete identity.

use serde::{Deserialize, Serialize};

use crate::bubble::{c0, critical_exponent, sobolev_constant, RadialBubble};
use crate::error::{Error, Result};
use crate::green_robin::BallDomain;
use crate::numerics::{fit_loglog, sphere_measure, RadialGrid, SlopeFit};
use crate::projection::ProjectedRadial;

/// Sign of the exponent offset: `p − ε` or `p + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Subcritical,
    Supercritical,
}

impl Branch {
    pub fn exponent(self, n: usize, eps: f64) -> Result<f64> {
        let p: f64 = critical_exponent(n)?;
        if !(eps >= 0.0) || eps >= p - 1.0 {
            return Err(Error::invalid(format!(
                "exponent offset {eps} outside [0, p−1)"
            )));
        }
        Ok(match self {
            Branch::Subcritical => p - eps,
            Branch::Supercritical => p + eps,
        })
    }

    pub fn signed(self, eps: f64) -> f64 {
        match self {
            Branch::Subcritical => -eps,
            Branch::Supercritical => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nodes: usize,
    /// Stretch `β` of the grid `r = R sinh(βs)/sinh(β)`.
    pub stretch: f64,
    /// Componentwise relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Newton iteration count above which continuation halves the ε step.
    pub step_iter_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nodes: 4097,
            stretch: 4.0,
            tol: 1e-12,
            max_iter: 60,
            step_iter_limit: 12,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self, domain: &BallDomain) -> Result<RadialGrid<f64>> {
        RadialGrid::sinh(domain.n, domain.radius, self.nodes, self.stretch)
    }
}

/// Finite-volume radial Laplacian: `(Lu)ᵢ = lᵢ(uᵢ₋₁ − uᵢ) + rᵢ(uᵢ₊₁ − uᵢ)`.
#[derive(Debug, Clone)]
pub struct FvLaplacian {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub volumes: Vec<f64>,
}

impl FvLaplacian {
    pub fn new(grid: &RadialGrid<f64>) -> Result<Self> {
        let r = grid.nodes();
        let k = r.len();
        let s = sphere_measure::<f64>(grid.dimension())?;
        let volumes = grid.cell_volumes()?;
        let nm1 = grid.dimension() as i32 - 1;
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        for i in 0..k {
            if i + 1 < k {
                let face = 0.5 * (r[i] + r[i + 1]);
                right[i] = s * face.powi(nm1) / ((r[i + 1] - r[i]) * volumes[i]);
            }
            if i > 0 {
                let face = 0.5 * (r[i - 1] + r[i]);
                left[i] = s * face.powi(nm1) / ((r[i] - r[i - 1]) * volumes[i]);
            }
        }
        Ok(Self {
            left,
            right,
            volumes,
        })
    }

    /// `Lu` at nodes `0..N−1`; the last node is a Dirichlet node and its
    /// entry is left at zero.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let k = u.len();
        let mut out = vec![0.0; k];
        for i in 0..k - 1 {
            let mut v = self.right[i] * (u[i + 1] - u[i]);
            if i > 0 {
                v += self.left[i] * (u[i - 1] - u[i]);
            }
            out[i] = v;
        }
        out
    }
}

/// Banded LU with partial pivoting (row interchanges), LAPACK `gbtrf` layout.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            a: vec![0.0; ld * n],
            piv: vec![0; n],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        // column-major band storage, diagonal at row kl + ku
        j * self.ld + (self.kl + self.ku + i - j)
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] = v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[self.idx(i, j)]
    }

    fn factor(&mut self) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        let kuu = self.kl + self.ku;
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.get(j, j).abs();
            for i in j + 1..=last {
                let v = self.get(i, j).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[j] = p;
            if best == 0.0 {
                return Err(Error::Singular(j));
            }
            let cmax = (j + kuu).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.a.swap(a, b);
                }
            }
            let d = self.get(j, j);
            for i in j + 1..=last {
                let f = self.get(i, j) / d;
                self.set(i, j, f);
                if f != 0.0 {
                    for c in j + 1..=cmax {
                        let v = self.get(i, c) - f * self.get(j, c);
                        self.set(i, c, v);
                    }
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        let kuu = self.kl + self.ku;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let last = (j + kl).min(n - 1);
            for i in j + 1..=last {
                b[i] -= self.get(i, j) * b[j];
            }
        }
        for j in (0..n).rev() {
            let cmax = (j + kuu).min(n - 1);
            let mut s = b[j];
            for c in j + 1..=cmax {
                s -= self.get(j, c) * b[c];
            }
            b[j] = s / self.get(j, j);
        }
    }
}

/// Discrete radial solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialSolution {
    pub grid: RadialGrid<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub eps: f64,
    pub branch: Branch,
    /// `u(0)`.
    #[serde(rename = "M")]
    pub m: f64,
    pub residual: f64,
    pub newton_iters: usize,
}

impl RadialSolution {
    pub fn exponent(&self) -> Result<f64> {
        self.branch.exponent(self.grid.dimension(), self.eps)
    }

    pub fn radius(&self) -> f64 {
        self.grid.radius()
    }

    /// `‖u‖² = ∫|Δu|²` as `Σ mᵢwᵢ²`.
    pub fn energy(&self) -> Result<f64> {
        let m = self.grid.cell_volumes()?;
        Ok(m.iter().zip(&self.w).map(|(m, w)| m * w * w).sum())
    }

    /// `∫u^{q+1}` as `Σ mᵢuᵢ^{q+1}`.
    pub fn lp_energy(&self) -> Result<f64> {
        let q = self.exponent()?;
        let m = self.grid.cell_volumes()?;
        Ok(m.iter()
            .zip(&self.u)
            .map(|(m, u)| m * u.max(0.0).powf(q + 1.0))
            .sum())
    }

    pub fn is_positive(&self) -> bool {
        let k = self.u.len();
        self.u[..k - 1].iter().all(|&v| v > 0.0)
    }

    pub fn is_radially_decreasing(&self) -> bool {
        self.u.windows(2).all(|w| w[1] < w[0])
    }

    /// Linear interpolation of `(u, w)` onto another grid of the same radius.
    pub fn interpolate(&self, grid: &RadialGrid<f64>) -> (Vec<f64>, Vec<f64>) {
        let r = self.grid.nodes();
        let lerp = |f: &[f64], x: f64| {
            let j = match r.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(j) => return f[j],
                Err(j) => j.clamp(1, r.len() - 1),
            };
            let t = (x - r[j - 1]) / (r[j] - r[j - 1]);
            f[j - 1] + t * (f[j] - f[j - 1])
        };
        let u = grid.nodes().iter().map(|&x| lerp(&self.u, x)).collect();
        let w = grid.nodes().iter().map(|&x| lerp(&self.w, x)).collect();
        (u, w)
    }

    /// Rows `(r, u, w)` in grid order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.grid
            .nodes()
            .iter()
            .zip(&self.u)
            .zip(&self.w)
            .map(|((r, u), w)| (*r, *u, *w))
    }

    pub fn metadata(&self) -> SolutionMetadata {
        SolutionMetadata {
            n: self.grid.dimension(),
            eps: self.eps,
            signed_eps: self.branch.signed(self.eps),
            branch: self.branch,
            m: self.m,
            residual: self.residual,
            newton_iters: self.newton_iters,
            nodes: self.grid.len(),
            radius: self.radius(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionMetadata {
    pub n: usize,
    pub eps: f64,
    pub signed_eps: f64,
    pub branch: Branch,
    #[serde(rename = "M")]
    pub m: f64,
    pub residual: f64,
    pub newton_iters: usize,
    pub nodes: usize,
    pub radius: f64,
}

/// Result of a Newton run, converged or not.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

/// Residual vectors of the pair `Lu − w = 0`, `Lw − u^q = 0`, together with
/// the row scales `max|w|` and `max u^q` used by the merit function, and the
/// componentwise magnitudes `|L||u| + |w|`, `|L||w| + u^q` of each row.
struct Residual {
    f1: Vec<f64>,
    f2: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    sw: f64,
    su: f64,
}

fn abs_apply(op: &FvLaplacian, u: &[f64], i: usize) -> f64 {
    let mut v = (op.left[i] + op.right[i]) * u[i].abs() + op.right[i] * u[i + 1].abs();
    if i > 0 {
        v += op.left[i] * u[i - 1].abs();
    }
    v
}

impl Residual {
    fn new(op: &FvLaplacian, u: &[f64], w: &[f64], q: f64) -> Self {
        let lu = op.apply(u);
        let lw = op.apply(w);
        let k = u.len() - 1;
        let uq: Vec<f64> = u[..k].iter().map(|v| v.max(0.0).powf(q)).collect();
        let f1 = (0..k).map(|i| lu[i] - w[i]).collect();
        let f2 = (0..k).map(|i| lw[i] - uq[i]).collect();
        let d1 = (0..k).map(|i| abs_apply(op, u, i) + w[i].abs()).collect();
        let d2 = (0..k).map(|i| abs_apply(op, w, i) + uq[i]).collect();
        let sw = w[..k]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let su = uq.iter().fold(0.0f64, |m, &v| m.max(v)).max(1e-300);
        Self {
            f1,
            f2,
            d1,
            d2,
            sw,
            su,
        }
    }

    /// Componentwise relative residual `maxᵢ |Fᵢ| / (|L||x| + |b|)ᵢ`. Unlike a
    /// norm relative to `max|w|`, its roundoff floor does not grow as the
    /// grid spacing near the origin shrinks.
    fn max_rel(&self) -> f64 {
        let rel = |f: &[f64], d: &[f64]| {
            f.iter()
                .zip(d)
                .fold(0.0f64, |m, (f, d)| m.max(f.abs() / d.max(1e-300)))
        };
        rel(&self.f1, &self.d1).max(rel(&self.f2, &self.d2))
    }

    /// Scaled Euclidean merit with fixed scales `(sw, su)`.
    fn merit(&self, sw: f64, su: f64) -> f64 {
        let a: f64 = self.f1.iter().map(|v| (v / sw).powi(2)).sum();
        let b: f64 = self.f2.iter().map(|v| (v / su).powi(2)).sum();
        (a + b).sqrt()
    }
}

/// Peak fraction below which a Newton run is declared to be collapsing.
const COLLAPSE_FRACTION: f64 = 1e-3;

/// Damped Newton on the two-field system. Unknowns are interleaved as
/// `(u₀, w₀, u₁, w₁, …)`, which gives a Jacobian of bandwidth 2.
///
/// Steps are damped by Armijo backtracking on the scaled residual; a step
/// that makes `u` non-positive is halved, and the run fails if no admissible
/// step is found.
pub fn newton(
    grid: &RadialGrid<f64>,
    q: f64,
    u0: Vec<f64>,
    w0: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    let op = FvLaplacian::new(grid)?;
    let k = grid.len() - 1;
    let mut u = u0;
    let mut w = w0;
    u[k] = 0.0;
    w[k] = 0.0;
    if u[..k].iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid(
            "initial guess must be positive in the interior",
        ));
    }
    let mut res = Residual::new(&op, &u, &w, q);
    let peak0 = u.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut iters = 0;
    let outcome =
        |u: Vec<f64>, w: Vec<f64>, iterations, residual, failure: Option<String>| NewtonOutcome {
            u,
            w,
            iterations,
            residual,
            converged: failure.is_none(),
            failure,
        };
    while res.max_rel() > cfg.tol {
        if iters >= cfg.max_iter {
            return Ok(outcome(
                u,
                w,
                iters,
                res.max_rel(),
                Some("iteration cap reached".into()),
            ));
        }
        iters += 1;
        // Row scaling keeps pivots comparable between the two equations.
        let (sw, su) = (res.sw, res.su);
        let mut jac = Banded::new(2 * k, 2, 2);
        let mut rhs = vec![0.0; 2 * k];
        for i in 0..k {
            let (ru, rw) = (2 * i, 2 * i + 1);
            let diag = -(op.left[i] + op.right[i]);
            // row 2i: (Lu)_i − w_i
            jac.set(ru, 2 * i, diag / sw);
            jac.set(ru, 2 * i + 1, -1.0 / sw);
            if i > 0 {
                jac.set(ru, 2 * (i - 1), op.left[i] / sw);
            }
            if i + 1 < k {
                jac.set(ru, 2 * (i + 1), op.right[i] / sw);
            }
            // row 2i+1: (Lw)_i − u_i^q
            jac.set(rw, 2 * i + 1, diag / su);
            jac.set(rw, 2 * i, -q * u[i].powf(q - 1.0) / su);
            if i > 0 {
                jac.set(rw, 2 * i - 1, op.left[i] / su);
            }
            if i + 1 < k {
                jac.set(rw, 2 * i + 3, op.right[i] / su);
            }
            rhs[ru] = -res.f1[i] / sw;
            rhs[rw] = -res.f2[i] / su;
        }
        if let Err(e) = jac.factor() {
            return Ok(outcome(u, w, iters, res.max_rel(), Some(e.to_string())));
        }
        jac.solve(&mut rhs);
        let m0 = res.merit(sw, su);
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1e-6 {
            let un: Vec<f64> = (0..=k)
                .map(|i| if i < k { u[i] + t * rhs[2 * i] } else { 0.0 })
                .collect();
            if un[..k].iter().all(|&v| v > 0.0) {
                let wn: Vec<f64> = (0..=k)
                    .map(|i| {
                        if i < k {
                            w[i] + t * rhs[2 * i + 1]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let rn = Residual::new(&op, &un, &wn, q);
                let mn = rn.merit(sw, su);
                // Near the roundoff floor the merit stagnates; a full step
                // that does not increase it is then accepted.
                let stagnant = t == 1.0 && mn <= m0 && rn.max_rel() < 1e-6;
                if mn.is_finite() && (mn <= (1.0 - 1e-4 * t) * m0 || stagnant) {
                    u = un;
                    w = wn;
                    res = rn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        // u = 0 is an isolated root of the subcritical problem and attracts
        // guesses that are too small; stop instead of exhausting the cap.
        if u.iter().fold(0.0f64, |m, v| m.max(*v)) < COLLAPSE_FRACTION * peak0 {
            return Ok(outcome(
                u,
                w,
                iters,
                res.max_rel(),
                Some("iterate collapses toward the trivial solution u = 0".into()),
            ));
        }
        if !accepted {
            return Ok(outcome(
                u,
                w,
                iters,
                res.max_rel(),
                Some(
                    "line search failed (step loses positivity or does not decrease the residual)"
                        .into(),
                ),
            ));
        }
    }
    let r = res.max_rel();
    Ok(outcome(u, w, iters, r, None))
}

/// Starting point of a solve.
#[derive(Debug, Clone)]
pub enum InitialGuess<'a> {
    /// `Pδ_{0,λ}` and its Laplacian.
    Bubble {
        lambda: f64,
    },
    Solution(&'a RadialSolution),
}

fn initial_fields(guess: &InitialGuess, grid: &RadialGrid<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    match guess {
        InitialGuess::Bubble { lambda } => {
            let pr = ProjectedRadial::new(grid.dimension(), *lambda, grid.radius())?;
            Ok((
                grid.nodes().iter().map(|&r| pr.value(r)).collect(),
                grid.nodes().iter().map(|&r| pr.laplacian(r)).collect(),
            ))
        }
        InitialGuess::Solution(s) => {
            if s.grid == *grid {
                Ok((s.u.clone(), s.w.clone()))
            } else {
                Ok(s.interpolate(grid))
            }
        }
    }
}

fn check_domain(domain: &BallDomain) -> Result<()> {
    if domain.center.iter().any(|&c| c != 0.0) {
        return Err(Error::invalid(
            "the radial solver works on balls centered at the origin",
        ));
    }
    Ok(())
}

/// Solves `Δ²u = u^{p∓ε}` on the default grid of `cfg`.
pub fn solve_radial(
    eps: f64,
    branch: Branch,
    domain: &BallDomain,
    init: &InitialGuess,
    cfg: &SolverConfig,
) -> Result<RadialSolution> {
    check_domain(domain)?;
    let grid = cfg.grid(domain)?;
    solve_on_grid(eps, branch, &grid, init, cfg)
}

pub fn solve_on_grid(
    eps: f64,
    branch: Branch,
    grid: &RadialGrid<f64>,
    init: &InitialGuess,
    cfg: &SolverConfig,
) -> Result<RadialSolution> {
    let q = branch.exponent(grid.dimension(), eps)?;
    let (u0, w0) = initial_fields(init, grid)?;
    let out = newton(grid, q, u0, w0, cfg)?;
    if let Some(reason) = out.failure {
        return Err(Error::Newton {
            iterations: out.iterations,
            residual: out.residual,
            reason,
        });
    }
    Ok(RadialSolution {
        grid: grid.clone(),
        m: out.u[0],
        u: out.u,
        w: out.w,
        eps,
        branch,
        residual: out.residual,
        newton_iters: out.iterations,
    })
}

/// Scale predicted by the leading balance, `(c₁φ/(c₂ε))^{1/(n−4)}`, with the
/// center values `c₁/c₂` and `φ = (2n−4)/n·R^{4−n}` of a ball.
pub fn predicted_lambda(n: usize, radius: f64, eps: f64, c1_over_c2: f64) -> f64 {
    let nf = n as f64;
    let phi = (2.0 * nf - 4.0) / nf * radius.powf(4.0 - nf);
    (c1_over_c2 * phi / eps).powf(1.0 / (nf - 4.0))
}

/// Outcome of a continuation sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub solutions: Vec<RadialSolution>,
    /// Intermediate offsets inserted by step bisection.
    pub inserted: Vec<f64>,
    pub failure: Option<String>,
}

impl Sweep {
    /// Solutions at the requested offsets only.
    pub fn requested(&self) -> Vec<&RadialSolution> {
        self.solutions
            .iter()
            .filter(|s| !self.inserted.contains(&s.eps))
            .collect()
    }
}

/// Continuation in `ε` along a decreasing schedule, warm-starting each solve
/// and halving the step when Newton is slow or fails.
pub fn continuation_sweep(
    eps_list: &[f64],
    branch: Branch,
    domain: &BallDomain,
    first_guess: &InitialGuess,
    cfg: &SolverConfig,
) -> Result<Sweep> {
    check_domain(domain)?;
    if eps_list.is_empty() {
        return Err(Error::invalid("empty ε schedule"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("ε schedule must be strictly decreasing"));
    }
    let grid = cfg.grid(domain)?;
    let mut sweep = Sweep {
        solutions: Vec::new(),
        inserted: Vec::new(),
        failure: None,
    };
    let first = match solve_on_grid(eps_list[0], branch, &grid, first_guess, cfg) {
        Ok(s) => s,
        Err(e) => {
            sweep.failure = Some(format!("ε = {}: {e}", eps_list[0]));
            return Ok(sweep);
        }
    };
    sweep.solutions.push(first);
    let mut depth = 0usize;
    for &target in &eps_list[1..] {
        loop {
            let prev = &sweep.solutions[sweep.solutions.len() - 1];
            let mut step_target = target;
            for _ in 0..depth {
                step_target = 0.5 * (prev.eps + step_target);
            }
            let guess = secant_guess(&sweep.solutions, step_target);
            let init = match &guess {
                Some(g) => InitialGuess::Solution(g),
                None => InitialGuess::Solution(prev),
            };
            match solve_on_grid(step_target, branch, &grid, &init, cfg) {
                Ok(sol) if sol.newton_iters <= cfg.step_iter_limit || depth >= MAX_BISECTIONS => {
                    let reached = step_target == target;
                    if !reached {
                        sweep.inserted.push(step_target);
                    }
                    sweep.solutions.push(sol);
                    // Grow the step again gradually after a success.
                    depth = depth.saturating_sub(1);
                    if reached {
                        break;
                    }
                }
                Ok(_) => depth += 1,
                Err(_) if depth < MAX_BISECTIONS => depth += 1,
                Err(e) => {
                    sweep.failure = Some(format!("ε = {step_target}: {e}"));
                    return Ok(sweep);
                }
            }
        }
    }
    Ok(sweep)
}

const MAX_BISECTIONS: usize = 8;

/// Secant predictor in `log ε`, extrapolating `log u` and `w` linearly from
/// the last two solutions. `None` when fewer than two are available.
fn secant_guess(solutions: &[RadialSolution], eps: f64) -> Option<RadialSolution> {
    let [.., s0, s1] = solutions else {
        return None;
    };
    let t = (eps.ln() - s1.eps.ln()) / (s1.eps.ln() - s0.eps.ln());
    let k = s1.u.len() - 1;
    let mut u = vec![0.0; k + 1];
    let mut w = vec![0.0; k + 1];
    for i in 0..k {
        u[i] = (s1.u[i].ln() + t * (s1.u[i].ln() - s0.u[i].ln())).exp();
        w[i] = s1.w[i] + t * (s1.w[i] - s0.w[i]);
    }
    Some(RadialSolution {
        m: u[0],
        u,
        w,
        eps,
        ..s1.clone()
    })
}

/// `u = αPδ_{0,λ} + v` with `v` orthogonal to `Pδ` and `λ∂_λPδ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    pub alpha: f64,
    pub a: Vec<f64>,
    pub lambda: f64,
    pub v_norm: f64,
    pub u_norm: f64,
    /// `(v, Pδ)`, `(v, λ∂_λPδ)`, then `(v, ∂_{a_i}Pδ)` for each axis.
    pub ortho_residuals: Vec<f64>,
    /// Residuals divided by `‖v‖·‖basis element‖` (zero when `v = 0`).
    pub ortho_scaled: Vec<f64>,
    /// Second derivative of `‖u − αPδ‖²` in `log λ` at the minimizer.
    pub curvature: f64,
}

impl Decomposition {
    pub fn v_relative(&self) -> f64 {
        self.v_norm / self.u_norm
    }
}

/// Discrete inner products `(f, g) = Σ mᵢ Δf(rᵢ) Δg(rᵢ)` against the stored
/// `w` and exact Laplacians of the projected bubble.
struct Projector<'a> {
    sol: &'a RadialSolution,
    volumes: Vec<f64>,
    u_norm2: f64,
    radius: f64,
}

struct ProjectionData {
    up: f64,
    pp: f64,
    ud: f64,
    pd: f64,
    dd: f64,
}

impl<'a> Projector<'a> {
    fn new(sol: &'a RadialSolution) -> Result<Self> {
        let volumes = sol.grid.cell_volumes()?;
        let u_norm2 = volumes.iter().zip(&sol.w).map(|(m, w)| m * w * w).sum();
        Ok(Self {
            sol,
            volumes,
            u_norm2,
            radius: sol.radius(),
        })
    }

    fn data(&self, lambda: f64) -> Result<ProjectionData> {
        let pr = ProjectedRadial::new(self.sol.grid.dimension(), lambda, self.radius)?;
        let mut d = ProjectionData {
            up: 0.0,
            pp: 0.0,
            ud: 0.0,
            pd: 0.0,
            dd: 0.0,
        };
        for ((&r, &m), &w) in self
            .sol
            .grid
            .nodes()
            .iter()
            .zip(&self.volumes)
            .zip(&self.sol.w)
        {
            let lp = pr.laplacian(r);
            let ld = pr.lambda_dlambda_laplacian(r);
            d.up += m * w * lp;
            d.pp += m * lp * lp;
            d.ud += m * w * ld;
            d.pd += m * lp * ld;
            d.dd += m * ld * ld;
        }
        Ok(d)
    }

    /// `(u,Pδ)²/‖Pδ‖²`, the part of `‖u‖²` captured at scale `λ`.
    fn captured(&self, log_lambda: f64) -> Result<f64> {
        let d = self.data(log_lambda.exp())?;
        Ok(d.up * d.up / d.pp)
    }

    /// `(v, λ∂_λPδ)` with the optimal `α`.
    fn gradient(&self, log_lambda: f64) -> Result<f64> {
        let d = self.data(log_lambda.exp())?;
        Ok(d.ud - d.up / d.pp * d.pd)
    }
}

/// Minimizes `‖u − αPδ_{0,λ}‖` over `α > 0`, `λ > 0`.
///
/// `α` is eliminated in closed form. The best `λ` is bracketed by a scan and
/// golden-section search in `log λ`, then polished as the root of
/// `(v, λ∂_λPδ) = 0` by Illinois regula falsi.
pub fn decompose(sol: &RadialSolution, domain: &BallDomain) -> Result<Decomposition> {
    check_domain(domain)?;
    if (domain.radius - sol.radius()).abs() > 1e-12 * domain.radius
        || domain.n != sol.grid.dimension()
    {
        return Err(Error::invalid("solution and domain do not match"));
    }
    let n = domain.n;
    let nf = n as f64;
    let proj = Projector::new(sol)?;
    if !sol.is_positive() {
        return Err(Error::invalid("decomposition needs a positive solution"));
    }
    let bubble_energy = sobolev_constant::<f64>(n)?.s_n4();
    let ratio = proj.u_norm2 / bubble_energy;
    if !(0.5..=2.0).contains(&ratio) {
        return Err(Error::invalid(format!(
            "energy is {ratio:.3}·S^(n/4), outside the single-bubble range [0.5, 2]"
        )));
    }
    let q = sol.exponent()?;
    let c0v: f64 = c0(n)?;
    let m = sol.m.max(1e-300);
    let guess = c0v.powf(-2.0 / (nf - 4.0)) * m.powf((q - 1.0) / 4.0);
    // Coarse scan over two decades around the scaling guess.
    let (lo, hi) = (guess.ln() - 2.5, guess.ln() + 2.5);
    let samples = 51;
    let mut best = (f64::NEG_INFINITY, 0usize);
    let xs: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    for (i, &x) in xs.iter().enumerate() {
        let v = proj.captured(x)?;
        if v > best.0 {
            best = (v, i);
        }
    }
    if best.1 == 0 || best.1 == samples - 1 {
        return Err(Error::Minimization(format!(
            "optimal scale not bracketed in [{:.3e}, {:.3e}]",
            lo.exp(),
            hi.exp()
        )));
    }
    let (mut a, mut b) = (xs[best.1 - 1], xs[best.1 + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (proj.captured(c)?, proj.captured(d)?);
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = proj.captured(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = proj.captured(d)?;
        }
    }
    let mut x = 0.5 * (a + b);
    // Polish on the gradient condition.
    let (mut xa, mut xb) = (x - 0.05, x + 0.05);
    let (mut ga, mut gb) = (proj.gradient(xa)?, proj.gradient(xb)?);
    if ga.signum() != gb.signum() && ga != 0.0 && gb != 0.0 {
        let mut side = 0;
        for _ in 0..200 {
            let xm = (xa * gb - xb * ga) / (gb - ga);
            let gm = proj.gradient(xm)?;
            x = xm;
            if gm == 0.0 || (xb - xa).abs() < 1e-15 {
                break;
            }
            if gm.signum() == ga.signum() {
                xa = xm;
                ga = gm;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            } else {
                xb = xm;
                gb = gm;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            }
        }
    }
    let lambda = x.exp();
    let dat = proj.data(lambda)?;
    let alpha = dat.up / dat.pp;
    if !(alpha > 0.0) {
        return Err(Error::Minimization(format!(
            "non-positive amplitude α = {alpha}"
        )));
    }
    // Direct evaluation; `‖u‖² − (u,Pδ)²/‖Pδ‖²` cancels badly when v is small.
    let pr = ProjectedRadial::new(n, lambda, domain.radius)?;
    let v_direct: f64 = sol
        .grid
        .nodes()
        .iter()
        .zip(&proj.volumes)
        .zip(&sol.w)
        .map(|((&r, &m), &w)| m * (w - alpha * pr.laplacian(r)).powi(2))
        .sum();
    let v_norm = v_direct.sqrt();
    let vp = dat.up - alpha * dat.pp;
    let vd = dat.ud - alpha * dat.pd;
    let mut ortho = vec![vp, vd];
    ortho.extend(std::iter::repeat_n(0.0, n));
    let basis_norms = [dat.pp.sqrt(), dat.dd.sqrt()];
    let mut scaled: Vec<f64> = ortho[..2]
        .iter()
        .zip(basis_norms)
        .map(|(r, b)| {
            if v_norm > 0.0 {
                r.abs() / (v_norm * b)
            } else {
                0.0
            }
        })
        .collect();
    scaled.extend(std::iter::repeat_n(0.0, n));
    let h = 1e-3;
    let j = |x: f64| -> Result<f64> { Ok(proj.u_norm2 - proj.captured(x)?) };
    let curvature = (j(x + h)? - 2.0 * j(x)? + j(x - h)?) / (h * h);
    Ok(Decomposition {
        alpha,
        a: domain.center.clone(),
        lambda,
        v_norm,
        u_norm: proj.u_norm2.sqrt(),
        ortho_residuals: ortho,
        ortho_scaled: scaled,
        curvature,
    })
}

/// `‖u − αPδ_{0,λ}‖` for given parameters, in the solver's discrete norm.
pub fn decomposition_distance(sol: &RadialSolution, alpha: f64, lambda: f64) -> Result<f64> {
    let pr = ProjectedRadial::new(sol.grid.dimension(), lambda, sol.radius())?;
    let vols = sol.grid.cell_volumes()?;
    Ok(sol
        .grid
        .nodes()
        .iter()
        .zip(&vols)
        .zip(&sol.w)
        .map(|((&r, &m), &w)| m * (w - alpha * pr.laplacian(r)).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Behaviour of `‖v_ε‖` along a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VnormDiagnostics {
    pub eps: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// `‖v‖/(ε + (λd)^{4−n})` per entry.
    pub bound_ratio: Vec<f64>,
    pub max_bound_ratio: f64,
    /// `‖v‖` against `ε`.
    pub v_fit: SlopeFit<f64>,
    /// `ε` against `λ`.
    pub eps_vs_lambda: SlopeFit<f64>,
    /// `(λd)^{4−n}` against `λ`.
    pub scale_term_vs_lambda: SlopeFit<f64>,
    pub v_decreasing: bool,
}

pub fn vnorm_diagnostics(
    sweep: &[Decomposition],
    eps_list: &[f64],
    domain: &BallDomain,
) -> Result<VnormDiagnostics> {
    if sweep.len() != eps_list.len() || sweep.len() < 5 {
        return Err(Error::invalid(
            "v-norm diagnostics need at least 5 matched entries",
        ));
    }
    let nf = domain.n as f64;
    let v: Vec<f64> = sweep.iter().map(|d| d.v_norm).collect();
    let lam: Vec<f64> = sweep.iter().map(|d| d.lambda).collect();
    let scale_term: Vec<f64> = sweep
        .iter()
        .map(|d| (d.lambda * domain.distance_to_boundary(&d.a)).powf(4.0 - nf))
        .collect();
    let ratio: Vec<f64> = v
        .iter()
        .zip(eps_list)
        .zip(&scale_term)
        .map(|((v, e), s)| v / (e + s))
        .collect();
    let max_bound_ratio = ratio.iter().fold(0.0f64, |m, r| m.max(*r));
    Ok(VnormDiagnostics {
        eps: eps_list.to_vec(),
        v_decreasing: v.windows(2).all(|w| w[1] < w[0]),
        v_fit: fit_loglog(eps_list, &v)?,
        eps_vs_lambda: fit_loglog(&lam, eps_list)?,
        scale_term_vs_lambda: fit_loglog(&lam, &scale_term)?,
        v_norm: v,
        bound_ratio: ratio,
        max_bound_ratio,
    })
}

/// Thresholds for calling a solution a concentrating bubble.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConcentrationTest {
    /// Bound on `‖v‖/‖u‖`.
    pub v_rel_max: f64,
    pub alpha_tol: f64,
    pub lambda_d_min: f64,
}

impl Default for ConcentrationTest {
    fn default() -> Self {
        Self {
            v_rel_max: 0.1,
            alpha_tol: 0.1,
            lambda_d_min: 20.0,
        }
    }
}

impl ConcentrationTest {
    pub fn passes(&self, d: &Decomposition, dist: f64) -> bool {
        d.v_relative() < self.v_rel_max
            && (d.alpha - 1.0).abs() < self.alpha_tol
            && d.lambda * dist > self.lambda_d_min
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub eps: f64,
    pub signed_eps: f64,
    pub converged: bool,
    pub positive: bool,
    pub newton_iters: usize,
    pub residual: f64,
    pub failure: Option<String>,
    /// `u(0)` of the returned iterate (converged or last).
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_pow_eps")]
    /// `M^ε`, for converged solves only.
    pub m_pow_eps: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_d: Option<f64>,
    pub v_norm: Option<f64>,
    pub v_relative: Option<f64>,
    pub concentrating: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub branch: Branch,
    pub initial_lambda: f64,
    pub test: ConcentrationTest,
    pub entries: Vec<ProbeEntry>,
    pub any_concentrating: bool,
}

/// Tries to solve `Δ²u = u^{p±ε}` from a concentrated bubble guess at each
/// `ε` and classifies what Newton returns.
///
/// A point counts as a concentrating branch only if Newton converged to a
/// positive solution that passes `test`. Solve failures are recorded.
pub fn probe(
    eps_list: &[f64],
    branch: Branch,
    domain: &BallDomain,
    initial_lambda: f64,
    test: ConcentrationTest,
    cfg: &SolverConfig,
) -> Result<ProbeReport> {
    check_domain(domain)?;
    let grid = cfg.grid(domain)?;
    let mut entries = Vec::new();
    for &eps in eps_list {
        let q = branch.exponent(domain.n, eps)?;
        let (u0, w0) = initial_fields(
            &InitialGuess::Bubble {
                lambda: initial_lambda,
            },
            &grid,
        )?;
        let out = newton(&grid, q, u0, w0, cfg)?;
        let k = grid.len() - 1;
        let positive = out.u[..k].iter().all(|&v| v > 0.0);
        let sol = RadialSolution {
            grid: grid.clone(),
            m: out.u[0],
            u: out.u.clone(),
            w: out.w.clone(),
            eps,
            branch,
            residual: out.residual,
            newton_iters: out.iterations,
        };
        let dec = if out.converged && positive {
            decompose(&sol, domain).ok()
        } else {
            None
        };
        let concentrating = dec
            .as_ref()
            .map(|d| test.passes(d, domain.radius))
            .unwrap_or(false);
        entries.push(ProbeEntry {
            eps,
            signed_eps: branch.signed(eps),
            converged: out.converged,
            positive,
            newton_iters: out.iterations,
            residual: out.residual,
            failure: out.failure.clone(),
            m: sol.m,
            m_pow_eps: out.converged.then(|| sol.m.abs().powf(eps)),
            alpha: dec.as_ref().map(|d| d.alpha),
            lambda: dec.as_ref().map(|d| d.lambda),
            lambda_d: dec.as_ref().map(|d| d.lambda * domain.radius),
            v_norm: dec.as_ref().map(|d| d.v_norm),
            v_relative: dec.as_ref().map(|d| d.v_relative()),
            concentrating,
        });
    }
    Ok(ProbeReport {
        branch,
        initial_lambda,
        test,
        any_concentrating: entries.iter().any(|e| e.concentrating),
        entries,
    })
}

/// Supercritical probe: exponent `p + ε`.
pub fn supercritical_probe(
    eps_list: &[f64],
    domain: &BallDomain,
    initial_lambda: f64,
    cfg: &SolverConfig,
) -> Result<ProbeReport> {
    probe(
        eps_list,
        Branch::Supercritical,
        domain,
        initial_lambda,
        ConcentrationTest::default(),
        cfg,
    )
}

/// Bubble profile helper used for initial guesses and tests.
pub fn bubble_samples(grid: &RadialGrid<f64>, lambda: f64) -> Result<Vec<f64>> {
    let b = RadialBubble::new(grid.dimension(), lambda)?;
    Ok(grid.nodes().iter().map(|&r| b.value(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nodes: usize) -> SolverConfig {
        SolverConfig {
            nodes,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn banded_lu_matches_dense() {
        let n = 9;
        let mut b = Banded::new(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                let v = if i == j {
                    0.1
                } else {
                    1.0 + (i * 7 + j * 3) as f64 % 5.0
                };
                b.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum())
            .collect();
        b.factor().unwrap();
        b.solve(&mut rhs);
        for (a, e) in rhs.iter().zip(&x) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn fv_laplacian_exact_on_r2() {
        let g = RadialGrid::sinh(6, 1.0, 129, 3.0).unwrap();
        let op = FvLaplacian::new(&g).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|r| r * r).collect();
        let lu = op.apply(&u);
        assert!(lu[..128].iter().all(|v| (v - 12.0).abs() < 1e-9));
    }

    #[test]
    fn solves_and_satisfies_energy_identity() {
        let d = BallDomain::unit(6).unwrap();
        let s = solve_radial(
            0.3,
            Branch::Subcritical,
            &d,
            &InitialGuess::Bubble { lambda: 8.0 },
            &cfg(513),
        )
        .unwrap();
        assert!(s.residual <= 1e-10);
        assert!(s.is_positive() && s.is_radially_decreasing());
        let (a, b) = (s.energy().unwrap(), s.lp_energy().unwrap());
        assert!((a - b).abs() / a < 1e-8);
    }

    #[test]
    fn decompose_exact_projected_bubble() {
        let d = BallDomain::unit(6).unwrap();
        let g = cfg(1025).grid(&d).unwrap();
        let pr = ProjectedRadial::new(6, 17.0, 1.0).unwrap();
        let sol = RadialSolution {
            u: g.nodes().iter().map(|&r| pr.value(r)).collect(),
            w: g.nodes().iter().map(|&r| pr.laplacian(r)).collect(),
            m: pr.value(0.0),
            grid: g,
            eps: 0.0,
            branch: Branch::Subcritical,
            residual: 0.0,
            newton_iters: 0,
        };
        let dec = decompose(&sol, &d).unwrap();
        assert!((dec.alpha - 1.0).abs() < 1e-10);
        assert!((dec.lambda - 17.0).abs() < 1e-8);
        assert!(dec.v_norm < 1e-6 * dec.u_norm);
    }
}
