//! Command-line grammar and the subcommand implementations.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftm_core::action::{self, MinimizeOptions};
use ftm_core::central::{self, HomotheticSpec};
use ftm_core::dynamics::{self, SampleGrid};
use ftm_core::free_time::{self, ToleranceSet};
use ftm_core::{ConfigurationF64, DiagnosticsSeriesF64, Error, MassSystemF64, TrajectoryF64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::format::Table;
use crate::problem::{parse_problem, path_record, rows_of, ProblemFile, ProblemOptions};
use crate::report::{sha256_hex, CheckRecord, Defaults, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ftm", version, about = "Free time minimizers of the Newtonian N-body problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fixed-time action minimizer between two configurations.
    Minimize(EndpointArgs),
    /// Free time minimizer (optimizes over the transfer time too).
    FreeMinimize(EndpointArgs),
    /// Critical action potential phi(x, y).
    Phi(EndpointArgs),
    /// Minimal central configuration of the mass system.
    CentralConfig(CommonArgs),
    /// Parabolic homothetic motion of a (given or computed) minimal configuration.
    Homothetic(RangeArgs),
    /// Integrates Newton's equations from positions --from and velocities --to.
    Integrate(RangeArgs),
    /// Integrates and runs the diagnostic battery.
    Diagnose(RangeArgs),
    /// Checks whether the path named by --from is a free time minimizer.
    VerifyFtm(RangeArgs),
    /// Rescaling sweep of phi over --lambda-list.
    ScalingCheck(ScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Number of path nodes (integrate/diagnose: number of samples).
    #[arg(long)]
    nodes: Option<usize>,
    /// Gradient tolerance (integrate/diagnose: integrator tolerance).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct EndpointArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Name of the initial configuration.
    #[arg(long)]
    from: String,
    /// Name of the final configuration.
    #[arg(long)]
    to: String,
    /// Transfer time (minimize only).
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args)]
struct RangeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    /// Problem file; three unit masses in the plane when absent.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long, value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. }
            | Error::CollisionTrapped { .. }
            | Error::CollisionApproach { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<crate::problem::ProblemError> for Failure {
    fn from(e: crate::problem::ProblemError) -> Self {
        usage(e.to_string())
    }
}

type CmdResult = Result<Emitted, Failure>;

/// What a command produced: a report and, for CSV output, a table.
struct Emitted {
    report: RunReport,
    table: Option<Table>,
    /// Exit code forced by a numerical event even though a report exists.
    code: Option<i32>,
}

struct Ctx {
    argv: Vec<String>,
    defaults: Defaults,
}

struct Loaded {
    problem: ProblemFile,
    sys: MassSystemF64,
    digest: String,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let problem = parse_problem(&bytes)?;
    let sys = problem.system()?;
    Ok(Loaded {
        problem,
        sys,
        digest: sha256_hex(&bytes),
    })
}

/// Effective solver settings: flag, then problem options, then default.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
struct Resolved {
    nodes: usize,
    tol: f64,
    max_iters: usize,
    restarts: usize,
    seed: u64,
    collision_guard: f64,
}

impl Resolved {
    fn new(args: &SolverArgs, opts: Option<&ProblemOptions>, d: &Defaults) -> Result<Self, Failure> {
        let o = opts.cloned().unwrap_or_default();
        let r = Self {
            nodes: args.nodes.or(o.nodes).unwrap_or(d.nodes),
            tol: args.tol.or(o.tol).unwrap_or(d.tol),
            max_iters: args.max_iters.or(o.max_iters).unwrap_or(d.max_iters),
            restarts: args.restarts.or(o.restarts).unwrap_or(d.restarts),
            seed: args.seed.or(o.seed).unwrap_or(d.seed),
            collision_guard: o.collision_guard.unwrap_or(d.collision_guard),
        };
        if !(r.tol > 0.0 && r.tol.is_finite()) {
            return Err(usage(format!("--tol must be positive, got {}", r.tol)));
        }
        if r.max_iters == 0 {
            return Err(usage("--max-iters must be positive"));
        }
        Ok(r)
    }

    fn minimize(&self) -> MinimizeOptions<f64> {
        MinimizeOptions {
            max_iters: self.max_iters,
            grad_tol: self.tol,
            restarts: self.restarts,
            rng_seed: self.seed,
            collision_guard: self.collision_guard,
        }
    }
}

impl Ctx {
    fn report(
        &self,
        command: &str,
        digest: Option<String>,
        resolved: &Resolved,
        parameters: Value,
        outputs: Value,
        checks: Vec<CheckRecord>,
    ) -> RunReport {
        let mut params = serde_json::to_value(resolved).expect("plain data");
        if let (Value::Object(p), Value::Object(extra)) = (&mut params, parameters) {
            p.extend(extra);
        }
        RunReport {
            command: command.to_string(),
            argv: self.argv.clone(),
            input_digest: digest,
            seed: resolved.seed,
            defaults: self.defaults.clone(),
            parameters: params,
            outputs,
            checks: checks.clone(),
            passed: checks.iter().all(|c| c.passed),
        }
    }
}

fn emitted(report: RunReport) -> CmdResult {
    Ok(Emitted {
        report,
        table: None,
        code: None,
    })
}

fn json_only(out: &OutputArgs) -> Result<(), Failure> {
    if out.format == Format::Csv {
        return Err(usage("--format csv is only available for integrate and diagnose"));
    }
    Ok(())
}

fn lower_bound_check(sys: &MassSystemF64, x: &ConfigurationF64, y: &ConfigurationF64, a: f64, tau: f64) -> CheckRecord {
    let d = x.max_body_distance(y);
    let m0 = sys.min_mass();
    // 2 A tau >= m0 d^2, reported as the ratio
    CheckRecord::above("action_lower_bound", 2.0 * a * tau / (m0 * d * d).max(f64::MIN_POSITIVE), 1.0)
}

fn path_json(p: &ftm_core::DiscretePathF64) -> Value {
    serde_json::to_value(path_record(p)).expect("plain data")
}

fn cmd_minimize(ctx: &Ctx, a: &EndpointArgs) -> CmdResult {
    json_only(&a.common.output)?;
    let tau = a.tau.ok_or_else(|| usage("minimize requires --tau"))?;
    let l = load(&a.common.problem)?;
    let r = Resolved::new(&a.common.solver, l.problem.options.as_ref(), &ctx.defaults)?;
    let x = l.problem.configuration(&a.from)?;
    let y = l.problem.configuration(&a.to)?;
    let rep = action::minimize_fixed_time(&l.sys, &x, &y, tau, r.nodes, &r.minimize())?;
    let checks = vec![
        CheckRecord::below("gradient_norm", rep.grad_norm, r.tol),
        lower_bound_check(&l.sys, &x, &y, rep.action_value, tau),
    ];
    let outputs = json!({
        "action": rep.action_value,
        "grad_norm": rep.grad_norm,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "min_separation": rep.min_separation,
        "path": path_json(&rep.path),
    });
    let params = json!({"from": a.from, "to": a.to, "tau": tau});
    emitted(ctx.report("minimize", Some(l.digest), &r, params, outputs, checks))
}

fn cmd_free_minimize(ctx: &Ctx, a: &EndpointArgs) -> CmdResult {
    json_only(&a.common.output)?;
    if a.tau.is_some() {
        return Err(usage("--tau is not accepted by free-minimize"));
    }
    let l = load(&a.common.problem)?;
    let r = Resolved::new(&a.common.solver, l.problem.options.as_ref(), &ctx.defaults)?;
    let x = l.problem.configuration(&a.from)?;
    let y = l.problem.configuration(&a.to)?;
    let res = free_time::minimize_free_time(&l.sys, &x, &y, r.nodes, &r.minimize())?;
    let mid = &res.path.nodes()[res.path.len() / 2];
    let energy_tol = 1e-3 * l.sys.potential(mid)?;
    let checks = vec![
        CheckRecord::below("energy_residual", res.energy_residual, energy_tol),
        lower_bound_check(&l.sys, &x, &y, res.phi_value, res.tau_star),
    ];
    let probes: Vec<Value> = res
        .probes
        .iter()
        .map(|p| json!({"tau": p.tau, "action": p.action, "mean_energy": p.mean_energy}))
        .collect();
    let outputs = json!({
        "phi": res.phi_value,
        "tau_star": res.tau_star,
        "energy_residual": res.energy_residual,
        "bracket": {"t_lo": res.bracket.t_lo, "t_hi": res.bracket.t_hi},
        "used_fallback": res.used_fallback,
        "grad_norm": res.report.grad_norm,
        "min_separation": res.report.min_separation,
        "probes": probes,
        "path": path_json(&res.path),
    });
    let params = json!({"from": a.from, "to": a.to});
    emitted(ctx.report("free-minimize", Some(l.digest), &r, params, outputs, checks))
}

fn cmd_phi(ctx: &Ctx, a: &EndpointArgs) -> CmdResult {
    json_only(&a.common.output)?;
    if a.tau.is_some() {
        return Err(usage("--tau is not accepted by phi"));
    }
    let l = load(&a.common.problem)?;
    let r = Resolved::new(&a.common.solver, l.problem.options.as_ref(), &ctx.defaults)?;
    let x = l.problem.configuration(&a.from)?;
    let y = l.problem.configuration(&a.to)?;
    let (outputs, checks) = if x == y {
        (json!({"phi": free_time::phi(&l.sys, &x, &y, r.nodes, &r.minimize())?}), vec![])
    } else {
        let res = free_time::minimize_free_time(&l.sys, &x, &y, r.nodes, &r.minimize())?;
        (
            json!({"phi": res.phi_value, "tau_star": res.tau_star}),
            vec![lower_bound_check(&l.sys, &x, &y, res.phi_value, res.tau_star)],
        )
    };
    let params = json!({"from": a.from, "to": a.to});
    emitted(ctx.report("phi", Some(l.digest), &r, params, outputs, checks))
}

fn sorted_distances(c: &ConfigurationF64) -> Vec<f64> {
    let rows: Vec<&[f64]> = c.rows().collect();
    let mut d = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let s: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

fn central_checks(sys: &MassSystemF64, res: &ftm_core::CentralConfigResultF64) -> Result<Vec<CheckRecord>, Failure> {
    let g = sys.center_of_mass(&res.a0)?;
    Ok(vec![
        CheckRecord::below("inertia_normalized", (sys.moment_of_inertia(&res.a0)? - 1.0).abs(), 1e-10),
        CheckRecord::below("center_of_mass", g.iter().map(|v| v * v).sum::<f64>().sqrt(), 1e-10),
        CheckRecord::below("central_residual", res.central_residual, 1e-6),
    ])
}

fn cmd_central(ctx: &Ctx, a: &CommonArgs) -> CmdResult {
    json_only(&a.output)?;
    let l = load(&a.problem)?;
    let r = Resolved::new(&a.solver, l.problem.options.as_ref(), &ctx.defaults)?;
    let res = central::find_minimal_configuration(&l.sys, r.seed, &r.minimize())?;
    let checks = central_checks(&l.sys, &res)?;
    let outputs = json!({
        "a0": rows_of(&res.a0),
        "u0": res.u0,
        "tangent_residual": res.tangent_residual,
        "central_residual": res.central_residual,
        "minimality_supported": res.minimality_supported,
        "pairwise_distances": sorted_distances(&res.a0),
    });
    emitted(ctx.report("central-config", Some(l.digest), &r, json!({}), outputs, checks))
}

fn cmd_homothetic(ctx: &Ctx, a: &RangeArgs) -> CmdResult {
    json_only(&a.common.output)?;
    if a.to.is_some() {
        return Err(usage("--to is not accepted by homothetic"));
    }
    let l = load(&a.common.problem)?;
    let r = Resolved::new(&a.common.solver, l.problem.options.as_ref(), &ctx.defaults)?;
    let t0 = a.t0.unwrap_or(ctx.defaults.t0_homothetic);
    let t1 = a.t1.unwrap_or(ctx.defaults.t1_homothetic);
    let mut checks = Vec::new();
    let spec = match &a.from {
        Some(name) => HomotheticSpec::new(&l.sys, &l.problem.configuration(name)?)?,
        None => {
            let res = central::find_minimal_configuration(&l.sys, r.seed, &r.minimize())?;
            checks.extend(central_checks(&l.sys, &res)?);
            HomotheticSpec::from_minimal(&res)?
        }
    };
    if a.from.is_some() {
        let cr = central::central_residual(&l.sys, &spec.a0)?;
        checks.push(CheckRecord::below("central_residual", cr, 1e-6));
    }
    checks.push(CheckRecord::below(
        "mu_relation",
        (spec.mu0.powi(3) - 4.5 * spec.u0).abs(),
        1e-10 * (1.0 + spec.u0),
    ));
    let exact = central::homothetic_action(&spec, t0, t1)?;
    let path = central::homothetic_path(&spec, t0, t1, r.nodes)?;
    let discrete = action::action(&l.sys, &path)?;
    let outputs = json!({
        "a0": rows_of(&spec.a0),
        "u0": spec.u0,
        "mu0": spec.mu0,
        "g": 4.0 / 3.0 * spec.mu0.powf(1.5),
        "action_exact": exact,
        "action_discrete": discrete,
        "relative_error": (discrete - exact).abs() / exact.abs(),
        "path": path_json(&path),
    });
    let params = json!({"from": a.from, "t0": t0, "t1": t1});
    emitted(ctx.report("homothetic", Some(l.digest), &r, params, outputs, checks))
}

struct IntegrationSetup {
    l: Loaded,
    r: Resolved,
    traj: TrajectoryF64,
    params: Value,
}

/// `log_samples`: sample log-spaced in time when `t0 > 0`.
fn run_integration(ctx: &Ctx, a: &RangeArgs, log_samples: bool) -> Result<IntegrationSetup, Failure> {
    let from = a.from.as_deref().ok_or_else(|| usage("--from (initial positions) is required"))?;
    let t1 = a.t1.ok_or_else(|| usage("--t1 is required"))?;
    let t0 = a.t0.unwrap_or(0.0);
    let l = load(&a.common.problem)?;
    let d = &ctx.defaults;
    // the node count and tolerance have integrator-specific defaults here
    let integ = Defaults {
        nodes: d.samples,
        tol: d.integrator_tol,
        ..d.clone()
    };
    let r = Resolved::new(&a.common.solver, None, &integ)?;
    let x0 = l.problem.configuration(from)?;
    let v0 = match &a.to {
        Some(name) => l.problem.configuration(name)?,
        None => l.sys.zeros(),
    };
    let opts = ftm_core::IntegrateOptionsF64 {
        rtol: r.tol,
        atol: r.tol,
        samples: if log_samples && t0 > 0.0 {
            SampleGrid::Log(r.nodes)
        } else {
            SampleGrid::Uniform(r.nodes)
        },
        max_steps: r.max_iters.max(10_000_000),
        ..Default::default()
    };
    let traj = dynamics::integrate_newton(&l.sys, &x0, &v0, (t0, t1), &opts)?;
    let sampling = if log_samples && t0 > 0.0 { "log" } else { "uniform" };
    let params = json!({"from": from, "to": a.to, "t0": t0, "t1": t1, "sampling": sampling});
    Ok(IntegrationSetup { l, r, traj, params })
}

pub(crate) fn trajectory_table(sys: &MassSystemF64, traj: &TrajectoryF64) -> Table {
    let (n, d) = (sys.n_bodies(), sys.dim());
    let mut cols = vec![("t".to_string(), "time")];
    for i in 0..n {
        for k in 0..d {
            cols.push((format!("x{i}_{k}"), "length"));
        }
    }
    for i in 0..n {
        for k in 0..d {
            cols.push((format!("v{i}_{k}"), "length/time"));
        }
    }
    let mut t = Table::new(cols);
    for ((&time, x), v) in traj.times.iter().zip(&traj.positions).zip(&traj.velocities) {
        let mut row = vec![time];
        row.extend_from_slice(x.coords());
        row.extend_from_slice(v.coords());
        t.rows.push(row);
    }
    t
}

pub(crate) fn series_table(s: &DiagnosticsSeriesF64) -> Table {
    let mut t = Table::new([
        ("t".to_string(), "time"),
        ("I".to_string(), "mass*length^2"),
        ("I_dot".to_string(), "mass*length^2/time"),
        ("U".to_string(), "mass*length^2/time^2"),
        ("T".to_string(), "mass*length^2/time^2"),
        ("g".to_string(), "mass^(3/4)*length^(3/2)/time"),
        ("h".to_string(), "mass*length^2/time^2"),
        ("com_drift".to_string(), "length"),
    ]);
    for k in 0..s.len() {
        t.rows.push(vec![
            s.times[k],
            s.inertia[k],
            s.inertia_rate[k],
            s.potential[k],
            s.kinetic[k],
            s.g[k],
            s.energy[k],
            s.com_drift[k],
        ]);
    }
    t
}

fn collision_json(traj: &TrajectoryF64) -> Value {
    match traj.collision {
        Some(ev) => json!({"time": ev.time, "min_separation": ev.min_separation}),
        None => Value::Null,
    }
}

fn energy_check(sys: &MassSystemF64, traj: &TrajectoryF64) -> Result<CheckRecord, Failure> {
    let t0 = sys.kinetic(&traj.velocities[0])?;
    Ok(CheckRecord::below(
        "energy_drift",
        traj.max_energy_drift,
        1e-8 * (1.0 + traj.energy0.abs() + t0),
    ))
}

fn cmd_integrate(ctx: &Ctx, a: &RangeArgs) -> CmdResult {
    let s = run_integration(ctx, a, false)?;
    let table = trajectory_table(&s.l.sys, &s.traj);
    let checks = vec![energy_check(&s.l.sys, &s.traj)?];
    let outputs = json!({
        "energy0": s.traj.energy0,
        "max_energy_drift": s.traj.max_energy_drift,
        "steps": s.traj.steps,
        "collision": collision_json(&s.traj),
        "trajectory": serde_json::to_value(&table).expect("plain data"),
    });
    let report = ctx.report("integrate", Some(s.l.digest), &s.r, s.params, outputs, checks);
    Ok(Emitted {
        report,
        table: (a.common.output.format == Format::Csv).then_some(table),
        code: s.traj.collision.map(|_| EXIT_NUMERICAL),
    })
}

fn cmd_diagnose(ctx: &Ctx, a: &RangeArgs) -> CmdResult {
    let s = run_integration(ctx, a, true)?;
    let sys = &s.l.sys;
    let series = dynamics::diagnostics(sys, &s.traj)?;
    let table = series_table(&series);
    let mut checks = vec![energy_check(sys, &s.traj)?];
    let lj = dynamics::lagrange_jacobi_residual(&series)?;
    checks.push(CheckRecord::below("lagrange_jacobi", lj, ctx.defaults.lagrange_jacobi_tol));

    // total momentum decides whether the center of mass must stay put
    let v0 = &s.traj.velocities[0];
    let p: f64 = sys
        .center_of_mass(v0)?
        .iter()
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt();
    let vscale = v0.max_body_norm().max(1.0);
    if p <= 1e-14 * vscale {
        let drift = series.com_drift.iter().copied().fold(0.0, f64::max);
        checks.push(CheckRecord::below("center_of_mass", drift, 1e-8));
    }
    let zero_energy = s.traj.energy0.abs() <= 1e-10 * (1.0 + series.potential[0]);
    let gmax = series.g.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let gm = dynamics::g_monotonicity(&series, 1e-8 * gmax.max(1.0));
    if zero_energy {
        checks.push(CheckRecord::above("g_min_increment", gm.min_increment, -1e-8 * gmax.max(1.0)));
    }
    let window = dynamics::tail_window(&series.times);
    let fit = |values: &[f64]| match dynamics::fit_power_law(&series.times, values, window) {
        Ok(f) => json!({
            "exponent": f.exponent,
            "coefficient": f.coefficient,
            "r_squared": f.r_squared,
            "window": [f.window.0, f.window.1],
            "samples": f.samples,
        }),
        Err(e) => json!({"error": e.to_string()}),
    };
    let parabolic = match dynamics::parabolic_diagnostic(&series, 0.5) {
        Ok(p) => json!({"t_tail_max": p.t_tail_max, "decreasing": p.decreasing, "tail_start": p.tail_start}),
        Err(e) => json!({"error": e.to_string()}),
    };
    let outputs = json!({
        "energy0": s.traj.energy0,
        "max_energy_drift": s.traj.max_energy_drift,
        "collision": collision_json(&s.traj),
        "lagrange_jacobi_residual": lj,
        "g_monotonicity": {"min_increment": gm.min_increment, "is_nondecreasing": gm.is_nondecreasing},
        "fit_inertia": fit(&series.inertia),
        "fit_potential": fit(&series.potential),
        "parabolic": parabolic,
        "series": serde_json::to_value(&table).expect("plain data"),
    });
    let report = ctx.report("diagnose", Some(s.l.digest), &s.r, s.params, outputs, checks);
    Ok(Emitted {
        report,
        table: (a.common.output.format == Format::Csv).then_some(table),
        code: s.traj.collision.map(|_| EXIT_NUMERICAL),
    })
}

fn cmd_verify(ctx: &Ctx, a: &RangeArgs) -> CmdResult {
    json_only(&a.common.output)?;
    if a.to.is_some() || a.t0.is_some() || a.t1.is_some() {
        return Err(usage("verify-ftm accepts only --from <path name>"));
    }
    let name = a.from.as_deref().ok_or_else(|| usage("--from (path name) is required"))?;
    let l = load(&a.common.problem)?;
    let r = Resolved::new(&a.common.solver, l.problem.options.as_ref(), &ctx.defaults)?;
    let path = l.problem.path(name)?;
    let tol = ToleranceSet {
        seed: r.seed,
        minimize: r.minimize(),
        ..ToleranceSet::defaults_for(&l.sys, &path)?
    };
    let rep = free_time::verify_free_time_minimizer(&l.sys, &path, &tol)?;
    let checks: Vec<CheckRecord> = rep
        .checks
        .iter()
        .map(|c| CheckRecord {
            name: c.name.to_string(),
            value: c.value,
            threshold: c.threshold,
            passed: c.passed,
        })
        .collect();
    let outputs = json!({"action": action::action(&l.sys, &path)?, "nodes": path.len()});
    let params = json!({"from": name});
    emitted(ctx.report("verify-ftm", Some(l.digest), &r, params, outputs, checks))
}

fn random_pair(sys: &MassSystemF64, rng: &mut ChaCha8Rng) -> Result<(ConfigurationF64, ConfigurationF64), Failure> {
    let mut one = || -> Result<ConfigurationF64, Failure> {
        loop {
            let coords: Vec<f64> = (0..sys.n_coords()).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let c = sys.configuration(coords)?;
            if c.min_separation() > 0.5 {
                return Ok(sys.centered(&c)?);
            }
        }
    };
    Ok((one()?, one()?))
}

fn cmd_scaling(ctx: &Ctx, a: &ScalingArgs) -> CmdResult {
    json_only(&a.output)?;
    let (problem, sys, digest) = match &a.problem {
        Some(p) => {
            let l = load(p)?;
            (Some(l.problem), l.sys, Some(l.digest))
        }
        None => (None, MassSystemF64::equal(3, 2)?, None),
    };
    let r = Resolved::new(
        &a.solver,
        problem.as_ref().and_then(|p| p.options.as_ref()),
        &ctx.defaults,
    )?;
    let lambdas = a.lambda_list.clone().unwrap_or_else(|| ctx.defaults.lambda_list.clone());
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(usage("--lambda-list must hold positive numbers"));
    }
    let pairs = match (&a.from, &a.to, &problem) {
        (Some(f), Some(t), Some(p)) => vec![(p.configuration(f)?, p.configuration(t)?)],
        (None, None, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
            (0..ctx.defaults.scaling_pairs)
                .map(|_| random_pair(&sys, &mut rng))
                .collect::<Result<_, _>>()?
        }
        (_, _, None) => return Err(usage("--from/--to need --problem")),
        _ => return Err(usage("give both --from and --to, or neither")),
    };
    let opts = r.minimize();
    let mut worst: f64 = 0.0;
    let mut min_bound = f64::INFINITY;
    let mut records = Vec::new();
    for (x, y) in &pairs {
        let base = free_time::minimize_free_time(&sys, x, y, r.nodes, &opts)?;
        let ratio = |a: f64, tau: f64, x: &ConfigurationF64, y: &ConfigurationF64| {
            let d = x.max_body_distance(y);
            2.0 * a * tau / (sys.min_mass() * d * d)
        };
        min_bound = min_bound.min(ratio(base.phi_value, base.tau_star, x, y));
        let mut sweep = Vec::new();
        for &lambda in &lambdas {
            let (xs, ys) = (x.scaled(lambda), y.scaled(lambda));
            let res = free_time::minimize_free_time(&sys, &xs, &ys, r.nodes, &opts)?;
            min_bound = min_bound.min(ratio(res.phi_value, res.tau_star, &xs, &ys));
            let dev = (res.phi_value - lambda.sqrt() * base.phi_value).abs() / base.phi_value;
            worst = worst.max(dev);
            sweep.push(json!({
                "lambda": lambda,
                "phi": res.phi_value,
                "tau_star": res.tau_star,
                "relative_deviation": dev,
            }));
        }
        records.push(json!({
            "from": rows_of(x),
            "to": rows_of(y),
            "phi": base.phi_value,
            "tau_star": base.tau_star,
            "sweep": sweep,
        }));
    }
    let checks = vec![
        CheckRecord::below("max_relative_deviation", worst, ctx.defaults.scaling_tol),
        CheckRecord::above("action_lower_bound", min_bound, 1.0),
    ];
    let outputs = json!({
        "masses": sys.masses(),
        "dim": sys.dim(),
        "max_relative_deviation": worst,
        "pairs": records,
    });
    let params = json!({"from": a.from, "to": a.to, "lambda_list": lambdas});
    emitted(ctx.report("scaling-check", digest, &r, params, outputs, checks))
}

fn output_of(cmd: &Command) -> &OutputArgs {
    match cmd {
        Command::Minimize(a) | Command::FreeMinimize(a) | Command::Phi(a) => &a.common.output,
        Command::CentralConfig(a) => &a.output,
        Command::Homothetic(a) | Command::Integrate(a) | Command::Diagnose(a) | Command::VerifyFtm(a) => {
            &a.common.output
        }
        Command::ScalingCheck(a) => &a.output,
    }
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| usage(format!("cannot write to stdout: {e}"))),
    }
}

/// Command echo for the report: program name normalized and the output
/// location dropped, so the report depends only on the inputs.
fn echo_argv(argv: &[OsString]) -> Vec<String> {
    let mut out = vec!["ftm".to_string()];
    let mut it = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 usage error, 2 numerical failure, 3 a
/// check failed.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let ctx = Ctx {
        argv: echo_argv(&argv),
        defaults: Defaults::default(),
    };
    let start = Instant::now();
    let result = match &cli.command {
        Command::Minimize(a) => cmd_minimize(&ctx, a),
        Command::FreeMinimize(a) => cmd_free_minimize(&ctx, a),
        Command::Phi(a) => cmd_phi(&ctx, a),
        Command::CentralConfig(a) => cmd_central(&ctx, a),
        Command::Homothetic(a) => cmd_homothetic(&ctx, a),
        Command::Integrate(a) => cmd_integrate(&ctx, a),
        Command::Diagnose(a) => cmd_diagnose(&ctx, a),
        Command::VerifyFtm(a) => cmd_verify(&ctx, a),
        Command::ScalingCheck(a) => cmd_scaling(&ctx, a),
    };
    let out = output_of(&cli.command);
    match result {
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
        Ok(em) => {
            let bytes = match &em.table {
                Some(t) => t.to_csv(),
                None => em.report.to_json(),
            };
            if let Err(f) = write_out(out.out.as_deref(), &bytes) {
                eprintln!("error: {}", f.message);
                return f.code;
            }
            for c in em.report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} = {:e} (threshold {:e})", c.name, c.value, c.threshold);
            }
            eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
            if let Some(code) = em.code {
                eprintln!("error: integration stopped near a collision");
                return code;
            }
            if em.report.passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
    }
}
