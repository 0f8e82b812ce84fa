//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults, then an optional
//! `--config` JSON file, then explicit flags), validates it, writes the
//! resolved config next to its artifacts and prints a short summary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bubble::{balance_constants_with, CriticalConstants};
use crate::error::{Error, Result};
use crate::green_robin::{boundary_blowup_fit, robin_gradient, robin_value, BallDomain};
use crate::projection::expansion_orders;
use crate::reduction::{
    blowup_verdict, solve_e3, supercritical_obstruction, ReducedState, SweepPoint,
    VerdictTolerances,
};
use crate::report::{write_json, write_solution, Provenance, Table};
use crate::solver::{
    continuation_sweep, decompose, predicted_lambda, supercritical_probe, vnorm_diagnostics,
    Branch, ConcentrationTest, Decomposition, InitialGuess, SolverConfig, Sweep,
};

/// Resolved run configuration, stored as `config.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub radius: f64,
    /// Decreasing schedule of exponent offsets.
    pub eps: Vec<f64>,
    /// Radial grid nodes.
    pub grid: usize,
    /// Stretch of the sinh grid.
    pub stretch: f64,
    /// Relative quadrature tolerance.
    pub tol: f64,
    /// Componentwise Newton residual tolerance.
    pub newton_tol: f64,
    pub out: PathBuf,
    /// Recorded for reproducibility; no computation here is randomized.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            n: 6,
            radius: 1.0,
            eps: vec![0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005],
            grid: s.nodes,
            stretch: s.stretch,
            tol: 1e-12,
            newton_tol: s.tol,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 5 {
            return Err(Error::invalid(format!("n = {} must be at least 5", self.n)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("radius must be positive"));
        }
        if !(self.tol > 0.0 && self.newton_tol > 0.0 && self.stretch > 0.0) {
            return Err(Error::invalid(
                "tolerances and grid stretch must be positive",
            ));
        }
        if self.grid < crate::numerics::MIN_NODES {
            return Err(Error::invalid(format!(
                "grid needs at least {} nodes",
                crate::numerics::MIN_NODES
            )));
        }
        if self.eps.len() < 4 {
            return Err(Error::invalid(format!(
                "ε schedule has {} points; at least 4 are needed",
                self.eps.len()
            )));
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("ε schedule entries must be positive"));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid("ε schedule must be strictly decreasing"));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            nodes: self.grid,
            stretch: self.stretch,
            tol: self.newton_tol,
            ..SolverConfig::default()
        }
    }

    pub fn domain(&self) -> Result<BallDomain> {
        BallDomain::centered(self.n, self.radius)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "blowup",
    version,
    about = "Blow-up diagnostics for Δ²u = u^(p∓ε) with Navier conditions on a ball"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ball radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated, strictly decreasing ε schedule.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Radial grid nodes.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Relative quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON run configuration; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = &self.eps {
            c.eps = v.clone();
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bubble and balance constants with the blow-up limit at the center.
    Constants(CommonArgs),
    /// Robin function along a diameter with boundary blow-up fits.
    Robin {
        #[command(flatten)]
        common: CommonArgs,
        /// Stations on the diameter.
        #[arg(long, default_value_t = 41)]
        stations: usize,
    },
    /// Subcritical sweep, decomposition and blow-up verdict.
    VerifyBlowup(CommonArgs),
    /// Supercritical probe, sign obstruction and subcritical contrast.
    Supercritical {
        #[command(flatten)]
        common: CommonArgs,
        /// Scale of the concentrated initial guess.
        #[arg(long, default_value_t = 40.0)]
        initial_lambda: f64,
    },
    /// Decay orders of the projection deficit along a λ sweep.
    ExpansionOrders {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "10,20,40,100,200,400,1000"
        )]
        lambdas: Vec<f64>,
    },
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::invalid(e.to_string()))?;
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Constants(c) => cmd_constants(&c.resolve()?),
        Command::Robin { common, stations } => cmd_robin(&common.resolve()?, *stations),
        Command::VerifyBlowup(c) => cmd_verify_blowup(&c.resolve()?),
        Command::Supercritical {
            common,
            initial_lambda,
        } => cmd_supercritical(&common.resolve()?, *initial_lambda),
        Command::ExpansionOrders { common, lambdas } => {
            cmd_expansion_orders(&common.resolve()?, lambdas)
        }
    }
}

fn prepare(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("config.json");
    cfg.save(&path)?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
struct ConstantsData {
    constants: CriticalConstants<f64>,
    c2_ratio: f64,
    phi_center: f64,
    /// `(c₁c₀²/c₂)φ(center)` with the positive `c₂`.
    blowup_limit: f64,
    c2_e34_positive: bool,
}

pub fn cmd_constants(cfg: &RunConfig) -> Result<Outcome> {
    let mut files = prepare(cfg)?;
    let c = balance_constants_with::<f64>(cfg.n, cfg.tol)?;
    let domain = cfg.domain()?;
    let phi = robin_value(&domain, &domain.center)?;
    let mut t = Table::new(&[
        ("n", Provenance::Formula),
        ("c0", Provenance::Formula),
        ("S", Provenance::Quadrature),
        ("S_n4", Provenance::Quadrature),
        ("c1", Provenance::Quadrature),
        ("c2_thm", Provenance::Quadrature),
        ("c2_e34", Provenance::Quadrature),
        ("c2_ratio", Provenance::Quadrature),
        ("phi_center", Provenance::Formula),
        ("blowup_limit", Provenance::Quadrature),
    ]);
    let limit = c.blowup_limit(phi);
    t.push(vec![
        cfg.n as f64,
        c.c0,
        c.s,
        c.s_n4,
        c.c1,
        c.c2_thm,
        c.c2_e34,
        c.c2_ratio(),
        phi,
        limit,
    ]);
    let csv = cfg.out.join("constants.csv");
    t.write_csv(&csv)?;
    let json = cfg.out.join("constants.json");
    let data = ConstantsData {
        constants: c,
        c2_ratio: c.c2_ratio(),
        phi_center: phi,
        blowup_limit: limit,
        c2_e34_positive: c.c2_e34 > 0.0,
    };
    write_json(
        &json,
        "constants",
        &[
            ("constants", Provenance::Quadrature),
            ("phi_center", Provenance::Formula),
        ],
        cfg,
        &data,
    )?;
    files.extend([csv, json]);
    let summary = vec![
        format!(
            "n = {}: c0 = {:.10}, S = {:.10}, S^(n/4) = {:.10}, c1 = {:.10}",
            cfg.n, c.c0, c.s, c.s_n4, c.c1
        ),
        format!(
            "c2_thm = {:.10}, c2_e34 = {:.10}, ratio = {:.4}, c2_e34 > 0: {}",
            c.c2_thm,
            c.c2_e34,
            c.c2_ratio(),
            c.c2_e34 > 0.0
        ),
        format!("limit (c1 c0²/c2)·φ(center) = {limit:.6}"),
    ];
    finish(true, files, summary)
}

pub fn cmd_robin(cfg: &RunConfig, stations: usize) -> Result<Outcome> {
    if stations < 3 {
        return Err(Error::invalid("robin needs at least 3 stations"));
    }
    let mut files = prepare(cfg)?;
    let domain = cfg.domain()?;
    let mut t = Table::new(&[
        ("x1", Provenance::Formula),
        ("d", Provenance::Formula),
        ("phi", Provenance::Formula),
        ("grad_norm", Provenance::Formula),
    ]);
    // Stations strictly inside (−R, R), symmetric about the center.
    let r = domain.radius;
    for i in 0..stations {
        let frac = -0.95 + 1.9 * i as f64 / (stations - 1) as f64;
        let x = domain.point_on_axis(0, frac);
        let g = robin_gradient(&domain, &x)?;
        t.push(vec![
            frac * r,
            domain.distance_to_boundary(&x),
            robin_value(&domain, &x)?,
            g.iter().map(|v| v * v).sum::<f64>().sqrt(),
        ]);
    }
    let csv = cfg.out.join("robin.csv");
    t.write_csv(&csv)?;
    let fit = boundary_blowup_fit(&domain)?;
    let phi_center = robin_value(&domain, &domain.center)?;
    let n = cfg.n as f64;
    #[derive(Serialize)]
    struct RobinData<'a> {
        phi_center: f64,
        phi_center_polynomial: f64,
        boundary: &'a crate::green_robin::BoundaryBlowup,
    }
    let json = cfg.out.join("robin.json");
    write_json(
        &json,
        "robin",
        &[
            ("phi_center", Provenance::Formula),
            ("boundary", Provenance::Fit),
        ],
        cfg,
        &RobinData {
            phi_center,
            phi_center_polynomial: (2.0 * n - 4.0) / n * r.powf(4.0 - n),
            boundary: &fit,
        },
    )?;
    files.extend([csv, json]);
    let summary = vec![
        format!("φ(center) = {phi_center:.10}"),
        format!(
            "boundary slopes: φ {:.4} (expected {}), |∇φ| {:.4} (expected {})",
            fit.phi_fit.slope,
            4 - cfg.n as i64,
            fit.grad_fit.slope,
            3 - cfg.n as i64
        ),
    ];
    finish(true, files, summary)
}

fn sweep_table(
    sweep: &Sweep,
    decs: &[Option<Decomposition>],
    c: &CriticalConstants<f64>,
    n: usize,
) -> Table {
    let k = (n as f64 - 4.0) / 2.0;
    let mut t = Table::new(&[
        ("eps", Provenance::Formula),
        ("M", Provenance::Solver),
        ("lambda", Provenance::Fit),
        ("alpha", Provenance::Fit),
        ("v_norm", Provenance::Fit),
        ("v_rel", Provenance::Fit),
        ("eps_M2", Provenance::Solver),
        ("eps_lambda", Provenance::Fit),
        ("M_over_c0_lambda", Provenance::Fit),
        ("energy", Provenance::Solver),
        ("lp_energy", Provenance::Solver),
        ("residual", Provenance::Solver),
        ("newton_iters", Provenance::Solver),
    ]);
    for (s, d) in sweep.requested().into_iter().zip(decs) {
        let nan = f64::NAN;
        let (l, a, v, vr) = d
            .as_ref()
            .map(|d| (d.lambda, d.alpha, d.v_norm, d.v_relative()))
            .unwrap_or((nan, nan, nan, nan));
        t.push(vec![
            s.eps,
            s.m,
            l,
            a,
            v,
            vr,
            s.eps * s.m * s.m,
            s.eps * l.powf(2.0 * k),
            s.m / (c.c0 * l.powf(k)),
            s.energy().unwrap_or(nan),
            s.lp_energy().unwrap_or(nan),
            s.residual,
            s.newton_iters as f64,
        ]);
    }
    t
}

#[derive(Debug, Serialize)]
struct EnergyCheck {
    s_n4: f64,
    energy: f64,
    lp_energy: f64,
    energy_gap: f64,
    lp_gap: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct VerifyData {
    requested_eps: Vec<f64>,
    inserted_eps: Vec<f64>,
    failure: Option<String>,
    energy: Option<EnergyCheck>,
    vnorm: Option<crate::solver::VnormDiagnostics>,
    verdict: Option<crate::reduction::BlowupVerdict>,
    reduced: Vec<ReducedState>,
    reduced_failures: Vec<String>,
    pass: bool,
}

pub fn cmd_verify_blowup(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.n < 6 {
        return Err(Error::invalid("verify-blowup needs n >= 6"));
    }
    if cfg.eps[0] < 0.3 {
        return Err(Error::invalid(
            "the sweep must start in the easy regime ε ≥ 0.3",
        ));
    }
    let mut files = prepare(cfg)?;
    let domain = cfg.domain()?;
    let consts = balance_constants_with::<f64>(cfg.n, cfg.tol)?;
    let scfg = cfg.solver();
    let lam0 = predicted_lambda(cfg.n, cfg.radius, cfg.eps[0], consts.c1 / consts.c2);
    let sweep = continuation_sweep(
        &cfg.eps,
        Branch::Subcritical,
        &domain,
        &InitialGuess::Bubble { lambda: lam0 },
        &scfg,
    )?;
    let requested = sweep.requested();
    let decs: Vec<Option<Decomposition>> = requested
        .iter()
        .map(|s| decompose(s, &domain).ok())
        .collect();
    let table = sweep_table(&sweep, &decs, &consts, cfg.n);
    let csv = cfg.out.join("sweep.csv");
    table.write_csv(&csv)?;
    files.push(csv);
    if let Some(last) = requested.last() {
        let (c, j) = write_solution(&cfg.out, "solution_final", last)?;
        files.extend([c, j]);
    }

    let mut data = VerifyData {
        requested_eps: cfg.eps.clone(),
        inserted_eps: sweep.inserted.clone(),
        failure: sweep.failure.clone(),
        energy: None,
        vnorm: None,
        verdict: None,
        reduced: Vec::new(),
        reduced_failures: Vec::new(),
        pass: false,
    };
    let complete = sweep.failure.is_none() && decs.iter().all(|d| d.is_some());
    if complete {
        let decs: Vec<Decomposition> = decs.into_iter().flatten().collect();
        let last = requested[requested.len() - 1];
        let (e, lp) = (last.energy()?, last.lp_energy()?);
        let energy_gap = (e - consts.s_n4).abs() / consts.s_n4;
        let lp_gap = (lp - consts.s_n4).abs() / consts.s_n4;
        data.energy = Some(EnergyCheck {
            s_n4: consts.s_n4,
            energy: e,
            lp_energy: lp,
            energy_gap,
            lp_gap,
            pass: energy_gap < 0.05 && lp_gap < 0.05,
        });
        if decs.len() >= 5 {
            data.vnorm = Some(vnorm_diagnostics(&decs, &cfg.eps, &domain)?);
        }
        let points: Vec<SweepPoint> = requested
            .iter()
            .zip(&decs)
            .map(|(s, d)| SweepPoint {
                eps: s.eps,
                m: s.m,
                decomposition: d.clone(),
            })
            .collect();
        data.verdict = Some(blowup_verdict(
            &points,
            &domain.center,
            &domain,
            &consts,
            VerdictTolerances::default(),
        )?);
        for &eps in cfg.eps.iter().filter(|e| **e <= 0.1) {
            match solve_e3(eps, &domain.center, &domain, &consts) {
                Ok(s) => data.reduced.push(s),
                Err(e) => data.reduced_failures.push(format!("ε = {eps}: {e}")),
            }
        }
        data.pass = data.verdict.as_ref().is_some_and(|v| v.pass)
            && data.energy.as_ref().is_some_and(|e| e.pass);
    }
    let json = cfg.out.join("verify_blowup.json");
    write_json(
        &json,
        "verify-blowup",
        &[
            ("energy", Provenance::Solver),
            ("vnorm", Provenance::Fit),
            ("verdict", Provenance::Fit),
            ("reduced", Provenance::Quadrature),
        ],
        cfg,
        &data,
    )?;
    files.push(json);
    if let Some(f) = &sweep.failure {
        return Err(Error::invalid(format!(
            "sweep stopped ({f}); partial results written to {}",
            cfg.out.display()
        )));
    }
    let mut summary = Vec::new();
    if let Some(v) = &data.verdict {
        for (m2, l) in v.extrapolated_eps_m2.iter().zip(&v.extrapolated_eps_lambda) {
            summary.push(format!(
                "extrapolated ({}): εM² = {:.3}, ελ^(n−4) = {:.4}",
                m2.model, m2.limit, l.limit
            ));
        }
        for c in &v.conventions {
            summary.push(format!(
                "c2 convention {}: targets {:.3} / {:.4}, pass = {}",
                c.convention, c.target_eps_m2, c.target_eps_lambda, c.pass
            ));
        }
    }
    summary.push(format!(
        "verdict: {}",
        if data.pass { "pass" } else { "fail" }
    ));
    finish(data.pass, files, summary)
}

#[derive(Debug, Serialize)]
struct ContrastEntry {
    eps: f64,
    alpha: f64,
    lambda_d: f64,
    v_relative: f64,
    concentrating: bool,
}

#[derive(Debug, Serialize)]
struct SupercriticalData {
    probe: crate::solver::ProbeReport,
    obstruction: crate::reduction::Obstruction,
    subcritical_contrast: Vec<ContrastEntry>,
    contrast_failure: Option<String>,
    pass: bool,
}

pub fn cmd_supercritical(cfg: &RunConfig, initial_lambda: f64) -> Result<Outcome> {
    let mut files = prepare(cfg)?;
    let domain = cfg.domain()?;
    let consts = balance_constants_with::<f64>(cfg.n, cfg.tol)?;
    let scfg = cfg.solver();
    let probe = supercritical_probe(&cfg.eps, &domain, initial_lambda, &scfg)?;
    let obstruction = supercritical_obstruction(&cfg.eps, &domain, &consts)?;

    // The same test on the subcritical branch at matching |ε|.
    let test = ConcentrationTest::default();
    let mut contrast = Vec::new();
    let mut contrast_failure = None;
    let mut schedule = cfg.eps.clone();
    if schedule[0] < 0.3 {
        schedule.insert(0, 0.3);
    }
    let lam0 = predicted_lambda(cfg.n, cfg.radius, schedule[0], consts.c1 / consts.c2);
    let sweep = continuation_sweep(
        &schedule,
        Branch::Subcritical,
        &domain,
        &InitialGuess::Bubble { lambda: lam0 },
        &scfg,
    )?;
    contrast_failure.clone_from(&sweep.failure);
    for s in sweep
        .requested()
        .into_iter()
        .filter(|s| cfg.eps.contains(&s.eps))
    {
        match decompose(s, &domain) {
            Ok(d) => contrast.push(ContrastEntry {
                eps: s.eps,
                alpha: d.alpha,
                lambda_d: d.lambda * domain.radius,
                v_relative: d.v_relative(),
                concentrating: test.passes(&d, domain.radius),
            }),
            Err(e) => contrast_failure = Some(format!("ε = {}: {e}", s.eps)),
        }
    }
    let small_ok = contrast
        .iter()
        .filter(|c| c.eps <= 0.02)
        .all(|c| c.concentrating);
    let pass = !probe.any_concentrating
        && obstruction.all_positive
        && obstruction.all_margins
        && contrast_failure.is_none()
        && small_ok;

    let mut t = Table::new(&[
        ("eps", Provenance::Formula),
        ("min_balance", Provenance::Formula),
        ("margin_ratio", Provenance::Formula),
        ("subcritical_root", Provenance::Formula),
        ("probe_converged", Provenance::Solver),
        ("probe_concentrating", Provenance::Solver),
    ]);
    for (o, p) in obstruction.entries.iter().zip(&probe.entries) {
        t.push(vec![
            o.eps,
            o.min_balance,
            o.margin_ratio,
            o.subcritical_root,
            f64::from(u8::from(p.converged)),
            f64::from(u8::from(p.concentrating)),
        ]);
    }
    let csv = cfg.out.join("supercritical.csv");
    t.write_csv(&csv)?;
    let json = cfg.out.join("supercritical.json");
    let data = SupercriticalData {
        probe,
        obstruction,
        subcritical_contrast: contrast,
        contrast_failure,
        pass,
    };
    write_json(
        &json,
        "supercritical",
        &[
            ("probe", Provenance::Solver),
            ("obstruction", Provenance::Formula),
            ("subcritical_contrast", Provenance::Fit),
        ],
        cfg,
        &data,
    )?;
    files.extend([csv, json]);
    let converged = data.probe.entries.iter().filter(|e| e.converged).count();
    let summary = vec![
        format!(
            "probe: {converged}/{} solves converged, concentrating branch found: {}",
            data.probe.entries.len(),
            data.probe.any_concentrating
        ),
        format!(
            "obstruction: balance positive everywhere: {}, margin ≥ c2·ε: {}",
            data.obstruction.all_positive, data.obstruction.all_margins
        ),
        format!("subcritical contrast concentrates for ε ≤ 0.02: {small_ok}"),
        format!("verdict: {}", if pass { "pass" } else { "fail" }),
    ];
    finish(pass, files, summary)
}

pub fn cmd_expansion_orders(cfg: &RunConfig, lambdas: &[f64]) -> Result<Outcome> {
    let mut files = prepare(cfg)?;
    let domain = cfg.domain()?;
    let orders = expansion_orders(lambdas, &domain)?;
    let mut t = Table::new(&[
        ("lambda", Provenance::Formula),
        ("theta_norm", Provenance::Quadrature),
        ("remainder_sup", Provenance::Quadrature),
        ("theta_lq", Provenance::Quadrature),
    ]);
    for i in 0..orders.lambdas.len() {
        t.push(vec![
            orders.lambdas[i],
            orders.theta_norm[i],
            orders.remainder_sup[i],
            orders.theta_lq[i],
        ]);
    }
    let csv = cfg.out.join("expansion_orders.csv");
    t.write_csv(&csv)?;
    let json = cfg.out.join("expansion_orders.json");
    write_json(
        &json,
        "expansion-orders",
        &[("fits", Provenance::Fit)],
        cfg,
        &orders,
    )?;
    files.extend([csv, json]);
    let n = cfg.n as f64;
    let summary = vec![
        format!(
            "‖θ‖ slope {:.4} (expected {}), remainder slope {:.4} (expected {})",
            orders.theta_norm_fit.slope,
            -(n - 4.0) / 2.0,
            orders.remainder_fit.slope,
            -n / 2.0
        ),
        format!("|θ|_(2n/(n−4)) slope {:.4}", orders.theta_lq_fit.slope),
    ];
    finish(true, files, summary)
}

fn finish(pass: bool, files: Vec<PathBuf>, summary: Vec<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        files,
        summary,
    })
}
