//! Command-line front end: generate, solve, verify, bench. Every command
//! writes its artifacts to files plus a manifest that is sufficient to
//! reproduce the run.
//!
//! Exit codes: 0 ok, 2 usage, 3 generation failure, 4 non-convergence,
//! 5 numeric failure.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calculus::{grad_l, grad_lb, jacobian_g, loss_l};
use crate::error::Result;
use crate::hessian::{bound_ledger, hessian_l, HessianMode};
use crate::leverage::{build_state, sigma_matrix};
use crate::newton::{
    certify_goodness, newton_exact, newton_sketched, planned_iterations, trace_to_csv,
    NewtonConfig, SolveMode, TermStatus,
};
use crate::numkit::{SeededRng, Vector};
use crate::oracle::{brute_sigma, fd_gradient, fd_hessian, fd_jacobian, psd_order_check, FdPlan};
use crate::problem::{
    feasible_point, gen_planted, load_instance, save_instance, scale_rows, validate_at, PlantSpec,
    ProblemInstance,
};
use crate::sketch::{sandwich_check, subsample_diag};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_NONCONVERGED: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

/// Substream ids hanging off the one user-facing seed. Instance generation
/// owns the default stream 0.
const STREAM_SKETCH: u64 = 2;
const STREAM_X0: u64 = 3;
const STREAM_VERIFY: u64 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "levinv",
    version,
    about = "Exact and sketch-accelerated Newton solvers for leverage-score gradient inversion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic instance with a planted optimum at x* = 0.
    Gen(GenArgs),
    /// Run a Newton solve and write the convergence trace.
    Solve(SolveArgs),
    /// Run oracle checks and write a machine-readable report.
    Verify(VerifyArgs),
    /// Sweep a parameter and write per-cell medians.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub kappa: f64,
    /// Lower bound on |b_i|; defaults to 0.5 / sqrt(n).
    #[arg(long)]
    pub b_floor: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub pd_margin: f64,
    /// Rescale c to unit norm (conforming-instance variant for bound tests).
    #[arg(long, default_value_t = false)]
    pub clamp_c: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModeArg {
    Exact,
    Sketched,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum HessianArg {
    Full,
    GaussNewton,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum XStarArg {
    /// The instance is planted at x* = 0.
    Zero,
    /// Optimum unknown; stop on the gradient tolerance.
    None,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Hessian assembly; defaults to full in exact mode, gauss-newton in
    /// sketched mode.
    #[arg(long, value_enum)]
    pub hessian: Option<HessianArg>,
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eps0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start point: "zero" or "random:RADIUS".
    #[arg(long, default_value = "zero")]
    pub x0: String,
    #[arg(long, value_enum, default_value_t = XStarArg::None)]
    pub xstar: XStarArg,
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckArg {
    Grad,
    Jac,
    Hess,
    Sigma,
    Sketch,
    Bounds,
    Rate,
}

impl CheckArg {
    const ALL: [CheckArg; 7] = [
        CheckArg::Grad,
        CheckArg::Jac,
        CheckArg::Hess,
        CheckArg::Sigma,
        CheckArg::Sketch,
        CheckArg::Bounds,
        CheckArg::Rate,
    ];
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Checks to run; defaults to all of them.
    #[arg(long, value_enum)]
    pub check: Vec<CheckArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SweepArg {
    N,
    D,
    Eps0,
}

impl SweepArg {
    fn name(&self) -> &'static str {
        match self {
            SweepArg::N => "n",
            SweepArg::D => "d",
            SweepArg::Eps0 => "eps0",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub sweep: SweepArg,
    /// Comma-separated cell values.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Dispatch a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    artifacts: Vec<String>,
    tool_version: String,
    started_unix_ms: u128,
    finished_unix_ms: u128,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let tmp = PathBuf::from(format!("{}.tmp", path.display()));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

fn write_manifest(
    command: &str,
    config: serde_json::Value,
    seed: u64,
    artifacts: &[&Path],
    started: u128,
) -> std::io::Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seed,
        artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
    };
    let primary = artifacts.first().expect("at least one artifact");
    let path = PathBuf::from(format!("{}.manifest.json", primary.display()));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&path, &text)
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn cmd_gen(args: &GenArgs) -> i32 {
    let started = unix_ms();
    if args.n < args.d || args.d == 0 {
        return fail(
            EXIT_USAGE,
            format!("need n >= d >= 1, got n = {}, d = {}", args.n, args.d),
        );
    }
    if args.kappa < 1.0 {
        return fail(EXIT_USAGE, "kappa must be >= 1");
    }
    let b_floor = args.b_floor.unwrap_or(0.5 / (args.n as f64).sqrt());
    if !(0.0..1.0).contains(&b_floor) || b_floor == 0.0 {
        return fail(EXIT_USAGE, "b-floor must lie in (0, 1)");
    }
    if args.pd_margin <= 0.0 {
        return fail(EXIT_USAGE, "pd-margin must be > 0");
    }

    let mut spec = PlantSpec::new(args.n, args.d, args.seed)
        .with_kappa(args.kappa)
        .with_b_floor(b_floor)
        .with_pd_margin(args.pd_margin);
    if args.clamp_c {
        spec = spec.with_clamped_c();
    }

    let (inst, _) = match gen_planted(&spec) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_GENERATION, e),
    };
    if let Err(e) = save_instance(&inst, &args.out) {
        return fail(EXIT_GENERATION, e);
    }
    let config = serde_json::to_value(args).expect("args serialize");
    if let Err(e) = write_manifest("gen", config, args.seed, &[&args.out], started) {
        return fail(EXIT_GENERATION, e);
    }
    println!("wrote {} ({} x {})", args.out.display(), inst.n, inst.d);
    EXIT_OK
}

fn parse_x0(spec: &str, inst: &ProblemInstance, seed: u64) -> std::result::Result<Vector, String> {
    if spec == "zero" {
        return Ok(Vector::zeros(inst.d));
    }
    if let Some(r) = spec.strip_prefix("random:") {
        let radius: f64 = r
            .parse()
            .map_err(|_| format!("bad radius in --x0 {spec}"))?;
        if radius < 0.0 || !radius.is_finite() {
            return Err(format!(
                "radius must be a finite nonnegative number, got {r}"
            ));
        }
        let mut rng = SeededRng::new(seed).substream(STREAM_X0);
        return Ok(rng.sphere_point(inst.d, radius));
    }
    Err(format!(
        "--x0 must be 'zero' or 'random:<radius>', got {spec}"
    ))
}

fn cmd_solve(args: &SolveArgs) -> i32 {
    let started = unix_ms();
    if !(args.eps0 > 0.0 && args.eps0 < 0.1) {
        return fail(
            EXIT_USAGE,
            format!("eps0 must lie in (0, 0.1), got {}", args.eps0),
        );
    }
    if !(args.delta > 0.0 && args.delta < 0.1) {
        return fail(
            EXIT_USAGE,
            format!("delta must lie in (0, 0.1), got {}", args.delta),
        );
    }
    if !args.eps.is_finite() || args.eps <= 0.0 {
        return fail(EXIT_USAGE, "eps must be > 0");
    }
    if args.max_iters == 0 {
        return fail(EXIT_USAGE, "max-iters must be >= 1");
    }

    let inst = match load_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let x0 = match parse_x0(&args.x0, &inst, args.seed) {
        Ok(x) => x,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    match validate_at(&inst, &x0) {
        Ok(rep) if rep.pass => {}
        Ok(_) => return fail(EXIT_NUMERIC, "x0 is infeasible: a residual entry vanishes"),
        Err(e) => return fail(EXIT_USAGE, e),
    }

    let hessian_mode = match (args.hessian, args.mode) {
        (Some(HessianArg::Full), _) => HessianMode::Full,
        (Some(HessianArg::GaussNewton), _) => HessianMode::GaussNewton,
        (None, ModeArg::Exact) => HessianMode::Full,
        (None, ModeArg::Sketched) => HessianMode::GaussNewton,
    };
    let cfg = NewtonConfig {
        mode: match args.mode {
            ModeArg::Exact => SolveMode::Exact,
            ModeArg::Sketched => SolveMode::Sketched,
        },
        hessian_mode,
        eps: args.eps,
        eps0: args.eps0,
        delta: args.delta,
        max_iters: args.max_iters,
        grad_tol: None,
        seed: args.seed,
        c_s: crate::sketch::DEFAULT_CS,
    };

    let zero = Vector::zeros(inst.d);
    let x_star = match args.xstar {
        XStarArg::Zero => Some(&zero),
        XStarArg::None => None,
    };

    let trace = match args.mode {
        ModeArg::Exact => newton_exact(&inst, &x0, &cfg, x_star),
        ModeArg::Sketched => {
            let mut rng = SeededRng::new(args.seed).substream(STREAM_SKETCH);
            newton_sketched(&inst, &x0, &cfg, x_star, &mut rng)
        }
    };
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return fail(EXIT_NUMERIC, e),
    };

    let echo = serde_json::to_string(&serde_json::to_value(args).expect("args serialize"))
        .unwrap_or_default();
    let csv = trace_to_csv(&trace, &echo);
    if let Err(e) = write_atomic(&args.trace, &csv) {
        return fail(EXIT_NUMERIC, e);
    }
    let config = serde_json::to_value(args).expect("args serialize");
    if let Err(e) = write_manifest("solve", config, args.seed, &[&args.trace], started) {
        return fail(EXIT_NUMERIC, e);
    }

    let last = trace.records.last().expect("trace is never empty");
    println!(
        "status={} iters={} final_grad={:e}{}",
        trace.status,
        last.t,
        last.grad_norm,
        last.dist_to_opt
            .map(|d| format!(" final_dist={d:e}"))
            .unwrap_or_default()
    );
    match trace.status {
        TermStatus::Converged => EXIT_OK,
        TermStatus::MaxIters => EXIT_NONCONVERGED,
        TermStatus::HessianFailure => EXIT_NUMERIC,
    }
}

struct CheckRecord {
    check: &'static str,
    metric: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl CheckRecord {
    fn upper(check: &'static str, metric: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            check,
            metric,
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    fn lower(check: &'static str, metric: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            check,
            metric,
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

fn verify_checks(
    inst: &ProblemInstance,
    checks: &[CheckArg],
    seed: u64,
) -> Result<Vec<CheckRecord>> {
    let mut rng = SeededRng::new(seed).substream(STREAM_VERIFY);
    let mut out = Vec::new();

    let sample_points = |rng: &mut SeededRng, k: usize| -> Vec<Vector> {
        (0..k).map(|_| feasible_point(inst, 0.4, rng)).collect()
    };

    for check in checks {
        match check {
            CheckArg::Grad => {
                let mut worst = 0.0f64;
                for x in sample_points(&mut rng, 3) {
                    let st = build_state(inst, &x)?;
                    let analytic = grad_l(inst, &st);
                    let fd = fd_gradient(
                        |y| Ok(loss_l(inst, &build_state(inst, y)?)),
                        &x,
                        &FdPlan::default(),
                    )?;
                    worst = worst.max(rel_err_vec(&analytic, &fd));
                }
                out.push(CheckRecord::upper("grad", "max_rel_err", worst, 1e-6));
            }
            CheckArg::Jac => {
                let mut worst = 0.0f64;
                for x in sample_points(&mut rng, 3) {
                    let st = build_state(inst, &x)?;
                    let analytic = jacobian_g(&st);
                    let fd = fd_jacobian(
                        |y| Ok(grad_lb(&build_state(inst, y)?)),
                        &x,
                        &FdPlan::default(),
                    )?;
                    worst = worst.max(rel_err_mat(&analytic, &fd));
                }
                out.push(CheckRecord::upper("jac", "max_rel_err", worst, 1e-5));
            }
            CheckArg::Hess => {
                let mut worst = 0.0f64;
                for x in sample_points(&mut rng, 2) {
                    let st = build_state(inst, &x)?;
                    let bundle = hessian_l(inst, &st, HessianMode::Full)?;
                    let fd = fd_hessian(
                        |y| Ok(loss_l(inst, &build_state(inst, y)?)),
                        &x,
                        &FdPlan::new(1e-4, true)?,
                    )?;
                    worst = worst.max(rel_err_mat(&bundle.h, &fd));
                }
                out.push(CheckRecord::upper("hess", "max_rel_err", worst, 5e-4));
            }
            CheckArg::Sigma => {
                let mut worst = 0.0f64;
                for x in sample_points(&mut rng, 3) {
                    let st = build_state(inst, &x)?;
                    let qr_path = sigma_matrix(&st);
                    let brute = brute_sigma(&st.ax)?;
                    worst = worst.max((qr_path - brute).amax());
                }
                out.push(CheckRecord::upper("sigma", "max_abs_diff", worst, 1e-9));
            }
            CheckArg::Sketch => {
                let trials = 50;
                let ones = Vector::from_element(inst.n, 1.0);
                let mut failures = 0usize;
                let mut disagreements = 0usize;
                for t in 0..trials {
                    let mut draw = rng.substream(100 + t as u64);
                    let sk = subsample_diag(&inst.a, &ones, 0.5, 0.05, &mut draw)?;
                    let (holds, _, _) = sandwich_check(&inst.a, &ones, &sk)?;
                    let gram = inst.a.transpose() * scale_rows(&inst.a, &ones);
                    let gram_sk = sk.gram(&inst.a);
                    let indep = psd_order_check(&gram_sk, &gram, 1.0 - sk.eps0, 1.0 + sk.eps0)?;
                    if !holds {
                        failures += 1;
                    }
                    if holds != indep {
                        disagreements += 1;
                    }
                }
                out.push(CheckRecord::upper(
                    "sketch",
                    "failure_fraction",
                    failures as f64 / trials as f64,
                    0.10,
                ));
                out.push(CheckRecord::upper(
                    "sketch",
                    "verifier_disagreements",
                    disagreements as f64,
                    0.0,
                ));
            }
            CheckArg::Bounds => {
                let x = Vector::zeros(inst.d);
                let st = build_state(inst, &x)?;
                let radius = 0.05 * inst.b.amax();
                match bound_ledger(inst, &st, 3, radius, &mut rng) {
                    Ok(ledger) => {
                        out.push(CheckRecord::upper(
                            "bounds",
                            "norm_b1",
                            ledger.norm_b1,
                            ledger.b1_limit,
                        ));
                        out.push(CheckRecord::upper(
                            "bounds",
                            "norm_b",
                            ledger.norm_b,
                            ledger.b_limit,
                        ));
                        out.push(CheckRecord::upper(
                            "bounds",
                            "hessian_lipschitz_ratio",
                            ledger.lipschitz_ratio_max,
                            ledger.lipschitz_limit,
                        ));
                        out.push(CheckRecord::lower(
                            "bounds",
                            "pd_floor",
                            ledger.pd_floor,
                            0.0,
                        ));
                    }
                    // Generate with --clamp-c for an instance these bounds
                    // apply to; without the hypotheses the check fails.
                    Err(crate::error::Error::HypothesisViolated { which }) => {
                        eprintln!("bounds: hypothesis violated: {which}");
                        out.push(CheckRecord::lower("bounds", "hypotheses_hold", 0.0, 1.0));
                    }
                    Err(e) => return Err(e),
                }
            }
            CheckArg::Rate => {
                // Planted instances put the optimum at the origin.
                let x_star = Vector::zeros(inst.d);
                let radius = 0.1 * inst.b.amax();
                let cert = certify_goodness(inst, &x_star, radius, 5, &mut rng)?;
                let r0 = radius.min(0.5 * cert.good_radius());
                let x0 = &x_star + rng.sphere_point(inst.d, r0);
                let cfg = NewtonConfig::exact();
                let trace = newton_exact(inst, &x0, &cfg, Some(&x_star))?;
                let mut max_rate = 0.0f64;
                for r in &trace.records {
                    if let (Some(rate), Some(dist)) = (r.rate, r.dist_to_opt) {
                        if dist > 1e-12 {
                            max_rate = max_rate.max(rate);
                        }
                    }
                }
                out.push(CheckRecord::upper("rate", "max_rate", max_rate, 0.4));
                let planned = planned_iterations(r0, cfg.eps).unwrap_or(1) as f64;
                out.push(CheckRecord::upper(
                    "rate",
                    "iterations",
                    (trace.records.len() - 1) as f64,
                    planned,
                ));
            }
        }
    }
    Ok(out)
}

fn rel_err_vec(a: &Vector, b: &Vector) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

fn rel_err_mat(a: &crate::numkit::Matrix, b: &crate::numkit::Matrix) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

fn cmd_verify(args: &VerifyArgs) -> i32 {
    let started = unix_ms();
    let inst = match load_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let checks: Vec<CheckArg> = if args.check.is_empty() {
        CheckArg::ALL.to_vec()
    } else {
        args.check.clone()
    };
    let records = match verify_checks(&inst, &checks, args.seed) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_NUMERIC, e),
    };

    let mut csv = String::from("check,metric,value,threshold,verdict\n");
    let mut all_pass = true;
    for r in &records {
        all_pass &= r.pass;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.check,
            r.metric,
            r.value,
            r.threshold,
            if r.pass { "pass" } else { "fail" }
        ));
        println!(
            "{:7} {:24} {:>14e} vs {:>12e}  {}",
            r.check,
            r.metric,
            r.value,
            r.threshold,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    if let Err(e) = write_atomic(&args.report, &csv) {
        return fail(EXIT_NUMERIC, e);
    }
    let config = serde_json::to_value(args).expect("args serialize");
    if let Err(e) = write_manifest("verify", config, args.seed, &[&args.report], started) {
        return fail(EXIT_NUMERIC, e);
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

fn cmd_bench(args: &BenchArgs) -> i32 {
    let started = unix_ms();
    if args.repeats == 0 {
        return fail(EXIT_USAGE, "repeats must be >= 1");
    }
    if args.values.is_empty() {
        return fail(EXIT_USAGE, "values must be nonempty");
    }
    if args.sweep == SweepArg::Eps0 && args.values.iter().any(|v| !(*v > 0.0 && *v < 0.1)) {
        return fail(EXIT_USAGE, "swept eps0 values must lie in (0, 0.1)");
    }

    let mut csv = String::from("sweep,value,median_wall_ms,median_rows_per_iter,median_iters\n");
    for (cell, value) in args.values.iter().enumerate() {
        let (n, d, eps0) = match args.sweep {
            SweepArg::N => (*value as usize, 5usize, 0.01),
            SweepArg::D => (500usize, *value as usize, 0.01),
            SweepArg::Eps0 => (500usize, 5usize, *value),
        };
        if n < d || d == 0 {
            return fail(EXIT_USAGE, format!("cell n = {n}, d = {d} is invalid"));
        }

        let mut walls = Vec::new();
        let mut rows = Vec::new();
        let mut iters = Vec::new();
        for rep in 0..args.repeats {
            let cell_seed = args
                .seed
                .wrapping_mul(1000)
                .wrapping_add(cell as u64 * 100 + rep as u64);
            let spec = PlantSpec::new(n, d, cell_seed);
            let (inst, xs) = match gen_planted(&spec) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_GENERATION, e),
            };
            let mut rng = SeededRng::new(cell_seed).substream(STREAM_X0);
            let x0 = &xs + rng.sphere_point(d, 0.05 * inst.b.amax());
            let mut cfg = NewtonConfig::sketched();
            cfg.eps = 1e-8;
            cfg.eps0 = eps0;
            cfg.max_iters = 40;
            cfg.seed = cell_seed;
            let mut sk_rng = SeededRng::new(cell_seed).substream(STREAM_SKETCH);
            let tick = std::time::Instant::now();
            let trace = match newton_sketched(&inst, &x0, &cfg, Some(&xs), &mut sk_rng) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_NUMERIC, e),
            };
            walls.push(tick.elapsed().as_secs_f64() * 1e3);
            let stepping: Vec<f64> = trace
                .records
                .iter()
                .take(trace.records.len().saturating_sub(1))
                .map(|r| r.rows_sampled as f64)
                .collect();
            rows.push(if stepping.is_empty() {
                0.0
            } else {
                stepping.iter().sum::<f64>() / stepping.len() as f64
            });
            iters.push((trace.records.len() - 1) as f64);
        }
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            args.sweep.name(),
            value,
            median(&mut walls),
            median(&mut rows),
            median(&mut iters)
        ));
    }
    if let Err(e) = write_atomic(&args.out, &csv) {
        return fail(EXIT_NUMERIC, e);
    }
    let config = serde_json::to_value(args).expect("args serialize");
    if let Err(e) = write_manifest("bench", config, args.seed, &[&args.out], started) {
        return fail(EXIT_NUMERIC, e);
    }
    println!("wrote {}", args.out.display());
    EXIT_OK
}
