//! Exact and subsampled Newton iterations with convergence tracing, plus the
//! empirical (l, M)-goodness certificate that justifies a start point.

use std::fmt::Write as _;
use std::time::Instant;

use crate::calculus::{grad_l, loss_l};
use crate::error::{Error, Result};
use crate::hessian::{
    hessian_l, kernel_b1_diag, lift_t_diag, reg_hessian, second_order_t, HessianMode,
};
use crate::leverage::{build_state, LeverageState};
use crate::numkit::{solve_spd, spectral_norm, sym_eigenvalues, Matrix, SeededRng, Vector};
use crate::problem::{scale_rows, validate_at, ProblemInstance};
use crate::sketch::{sandwich_check, subsample_diag_with_cs, DEFAULT_CS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Exact,
    Sketched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermStatus {
    Converged,
    MaxIters,
    HessianFailure,
}

impl std::fmt::Display for TermStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TermStatus::Converged => write!(f, "Converged"),
            TermStatus::MaxIters => write!(f, "MaxIters"),
            TermStatus::HessianFailure => write!(f, "HessianFailure"),
        }
    }
}

/// Solver settings. `eps` is the target distance to the optimum when it is
/// known; `grad_tol` is the fallback stop and defaults to
/// 1e-10 * (1 + initial gradient norm).
#[derive(Debug, Clone)]
pub struct NewtonConfig {
    pub mode: SolveMode,
    pub hessian_mode: HessianMode,
    pub eps: f64,
    pub eps0: f64,
    pub delta: f64,
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
    pub seed: u64,
    pub c_s: f64,
}

impl NewtonConfig {
    pub fn exact() -> Self {
        Self {
            mode: SolveMode::Exact,
            hessian_mode: HessianMode::Full,
            eps: 1e-10,
            eps0: 0.01,
            delta: 0.05,
            max_iters: 50,
            grad_tol: None,
            seed: 0,
            c_s: DEFAULT_CS,
        }
    }

    pub fn sketched() -> Self {
        Self {
            mode: SolveMode::Sketched,
            hessian_mode: HessianMode::GaussNewton,
            eps: 1e-8,
            ..Self::exact()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::BadRange {
                context: format!("eps must be > 0, got {}", self.eps),
            });
        }
        if !(self.eps0 > 0.0 && self.eps0 < 0.1) {
            return Err(Error::BadRange {
                context: format!("eps0 must lie in (0, 0.1), got {}", self.eps0),
            });
        }
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return Err(Error::BadRange {
                context: format!("delta must lie in (0, 0.1), got {}", self.delta),
            });
        }
        if self.max_iters == 0 {
            return Err(Error::BadRange {
                context: "max_iters must be >= 1".to_string(),
            });
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub t: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub dist_to_opt: Option<f64>,
    /// dist_t / dist_{t-1} when both are available.
    pub rate: Option<f64>,
    pub rows_sampled: usize,
    /// ||H - A^T D_diag A|| / ||H|| in sketched mode.
    pub hessian_dev: Option<f64>,
    /// Extreme generalized eigenvalues of the sketched Gram against
    /// A^T D_diag A.
    pub sandwich_lo: Option<f64>,
    pub sandwich_hi: Option<f64>,
    /// Measured sandwich width of the step matrix against the true Hessian.
    pub eps0_eff: Option<f64>,
    pub backtracks: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub records: Vec<IterRecord>,
    pub status: TermStatus,
    pub x_final: Vector,
}

/// Empirical strong-convexity floor and Hessian-Lipschitz estimate over a
/// sampled ball, with the good-seed verdict radius * M <= 0.1 l.
#[derive(Debug, Clone)]
pub struct GoodnessCertificate {
    pub l_est: f64,
    pub m_est: f64,
    pub seed_ok: bool,
    pub radius: f64,
}

impl GoodnessCertificate {
    /// Largest start distance the certificate vouches for.
    pub fn good_radius(&self) -> f64 {
        if self.m_est > 0.0 {
            0.1 * self.l_est / self.m_est
        } else {
            f64::INFINITY
        }
    }
}

/// Iteration count after which a 0.4-contraction drops r0 under eps:
/// ceil(log(r0/eps) / log(1/0.4)).
pub fn planned_iterations(r0: f64, eps: f64) -> Result<usize> {
    if !(r0 > eps && eps > 0.0) {
        return Err(Error::BadRange {
            context: format!("planned_iterations needs r0 > eps > 0, got r0 = {r0}, eps = {eps}"),
        });
    }
    Ok(((r0 / eps).ln() / (1.0f64 / 0.4).ln()).ceil() as usize)
}

/// Exact Newton: x <- x - H(x)^{-1} grad L(x).
pub fn newton_exact(
    inst: &ProblemInstance,
    x0: &Vector,
    cfg: &NewtonConfig,
    x_star: Option<&Vector>,
) -> Result<ConvergenceTrace> {
    cfg.validate()?;
    run_newton(inst, x0, cfg, x_star, None)
}

/// Subsampled Newton: per iteration the inner kernel is reduced to its
/// diagonal surrogate D = diag(G) + w o w, subsampled by leverage scores
/// with per-iteration failure budget delta / max_iters, and the step solves
/// against A^T D~ A.
pub fn newton_sketched(
    inst: &ProblemInstance,
    x0: &Vector,
    cfg: &NewtonConfig,
    x_star: Option<&Vector>,
    rng: &mut SeededRng,
) -> Result<ConvergenceTrace> {
    cfg.validate()?;
    run_newton(inst, x0, cfg, x_star, Some(rng))
}

fn run_newton(
    inst: &ProblemInstance,
    x0: &Vector,
    cfg: &NewtonConfig,
    x_star: Option<&Vector>,
    mut rng: Option<&mut SeededRng>,
) -> Result<ConvergenceTrace> {
    let report = validate_at(inst, x0)?;
    if !report.pass {
        return Err(Error::ZeroResidualRow {
            row: report.worst_row,
            value: report.min_abs_residual,
            tol: report.tol,
        });
    }

    let sketched = rng.is_some();
    let mut x = x0.clone();
    let mut records: Vec<IterRecord> = Vec::new();
    let mut grad_tol = cfg.grad_tol;
    let mut prev_dist: Option<f64> = None;

    for t in 0..=cfg.max_iters {
        let tick = Instant::now();
        let state = build_state(inst, &x)?;
        let loss = loss_l(inst, &state);
        let grad = grad_l(inst, &state);
        let grad_norm = grad.norm();
        let tol = *grad_tol.get_or_insert(1e-10 * (1.0 + grad_norm));
        let dist = x_star.map(|xs| (&x - xs).norm());
        let rate = match (dist, prev_dist) {
            (Some(d), Some(pd)) if pd > 0.0 => Some(d / pd),
            _ => None,
        };

        let mut record = IterRecord {
            t,
            loss,
            grad_norm,
            dist_to_opt: dist,
            rate,
            rows_sampled: if sketched { 0 } else { inst.n },
            hessian_dev: None,
            sandwich_lo: None,
            sandwich_hi: None,
            eps0_eff: None,
            backtracks: 0,
            wall_ms: 0.0,
        };

        let dist_reached = matches!(dist, Some(d) if d <= cfg.eps);
        if dist_reached || grad_norm <= tol {
            record.wall_ms = tick.elapsed().as_secs_f64() * 1e3;
            records.push(record);
            return Ok(ConvergenceTrace {
                records,
                status: TermStatus::Converged,
                x_final: x,
            });
        }
        if t == cfg.max_iters {
            record.wall_ms = tick.elapsed().as_secs_f64() * 1e3;
            records.push(record);
            return Ok(ConvergenceTrace {
                records,
                status: TermStatus::MaxIters,
                x_final: x,
            });
        }

        // Build the step matrix.
        let step_matrix = if let Some(rng) = rng.as_deref_mut() {
            sketched_step_matrix(inst, &state, cfg, rng, &mut record)?
        } else {
            let bundle = hessian_l(inst, &state, cfg.hessian_mode)?;
            record.eps0_eff = Some(0.0);
            bundle.h
        };

        let step = match solve_spd(&step_matrix, &grad) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. }) => {
                record.wall_ms = tick.elapsed().as_secs_f64() * 1e3;
                records.push(record);
                return Ok(ConvergenceTrace {
                    records,
                    status: TermStatus::HessianFailure,
                    x_final: x,
                });
            }
            Err(e) => return Err(e),
        };

        // Full Newton step, halved only to keep every residual entry nonzero.
        let mut alpha = 1.0;
        let mut accepted = None;
        for k in 0..=20 {
            let candidate = &x - &step * alpha;
            match validate_at(inst, &candidate) {
                Ok(rep) if rep.pass => {
                    accepted = Some(candidate);
                    record.backtracks = k;
                    break;
                }
                Ok(rep) => {
                    if k == 20 {
                        return Err(Error::ZeroResidualRow {
                            row: rep.worst_row,
                            value: rep.min_abs_residual,
                            tol: rep.tol,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        let next = accepted.expect("either accepted or errored out");

        record.wall_ms = tick.elapsed().as_secs_f64() * 1e3;
        records.push(record);
        prev_dist = dist;
        x = next;
    }
    unreachable!("loop always returns");
}

/// Assemble the sketched step matrix and fill the diagnostic fields of the
/// record. A non-positive-definite surrogate surfaces later through the
/// solve and terminates the run as HessianFailure.
fn sketched_step_matrix(
    inst: &ProblemInstance,
    state: &LeverageState,
    cfg: &NewtonConfig,
    rng: &mut SeededRng,
    record: &mut IterRecord,
) -> Result<Matrix> {
    // Diagonal surrogate: diag(G) + w o w with G = S^{-1} B S^{-1}.
    let mut b_diag = kernel_b1_diag(state);
    if cfg.hessian_mode == HessianMode::Full {
        let t = second_order_t(inst, state)?;
        b_diag += lift_t_diag(state, &t)?;
    }
    let ww = inst.w.component_mul(&inst.w);
    let d_diag = Vector::from_fn(inst.n, |i, _| {
        (b_diag[i] / (state.s[i] * state.s[i]) + ww[i]).max(1e-12)
    });

    let delta_iter = cfg.delta / cfg.max_iters as f64;
    let sk = subsample_diag_with_cs(&inst.a, &d_diag, cfg.eps0, delta_iter, cfg.c_s, rng)?;
    record.rows_sampled = sk.nnz();

    let h_sk = sk.gram(&inst.a);

    // Diagnostics: surrogate quality against the true Hessian and the
    // sandwich of the sketch against its own target.
    if let Ok((_, lo, hi)) = sandwich_check(&inst.a, &d_diag, &sk) {
        record.sandwich_lo = Some(lo);
        record.sandwich_hi = Some(hi);
    }
    let h_ref = hessian_l(inst, state, HessianMode::Full)?.h;
    let a_d_a = inst.a.transpose() * scale_rows(&inst.a, &d_diag);
    let h_norm = spectral_norm(&h_ref);
    if h_norm > 0.0 {
        record.hessian_dev = Some(spectral_norm(&(&h_ref - &a_d_a)) / h_norm);
    }
    record.eps0_eff = generalized_width(&h_sk, &h_ref);

    Ok(h_sk)
}

/// Sandwich width of P against PD Q: max(hi - 1, 1 - lo) over the
/// generalized eigenvalues.
fn generalized_width(p: &Matrix, q: &Matrix) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(q.clone())?;
    let l_inv = chol.l().try_inverse()?;
    let reduced = &l_inv * p * l_inv.transpose();
    let eig = sym_eigenvalues(&reduced);
    let lo = eig[0];
    let hi = *eig.last().unwrap();
    Some((hi - 1.0).max(1.0 - lo).max(0.0))
}

/// Estimate (l, M) over a sampled ball around x_star. With radius 0 the
/// Lipschitz estimate is 0 by convention and only x_star itself is probed.
pub fn certify_goodness(
    inst: &ProblemInstance,
    x_star: &Vector,
    radius: f64,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<GoodnessCertificate> {
    let mut points = vec![x_star.clone()];
    if radius > 0.0 {
        let mut found = 0;
        let mut attempts = 0;
        while found < samples && attempts < 50 * samples.max(1) {
            attempts += 1;
            let x = x_star + rng.ball_point(inst.d, radius);
            if matches!(validate_at(inst, &x), Ok(rep) if rep.pass) {
                points.push(x);
                found += 1;
            }
        }
        if found < samples {
            return Err(Error::ProbeInfeasible {
                context: format!("only {found}/{samples} feasible samples in radius {radius}"),
            });
        }
    }

    let mut hessians = Vec::with_capacity(points.len());
    let mut l_est = f64::INFINITY;
    for x in &points {
        let st = build_state(inst, x)?;
        let h = hessian_l(inst, &st, HessianMode::Full)?.h;
        l_est = l_est.min(sym_eigenvalues(&h)[0]);
        hessians.push(h);
    }
    let mut m_est = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let gap = (&points[i] - &points[j]).norm();
            if gap > 1e-12 {
                m_est = m_est.max(spectral_norm(&(&hessians[i] - &hessians[j])) / gap);
            }
        }
    }
    Ok(GoodnessCertificate {
        l_est,
        m_est,
        seed_ok: l_est > 0.0 && radius * m_est <= 0.1 * l_est,
        radius,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render the trace as CSV: one line per iteration, one trailing comment
/// line carrying the terminal status and a config echo.
pub fn trace_to_csv(trace: &ConvergenceTrace, config_echo: &str) -> String {
    let mut out =
        String::from("iter,loss,grad_norm,dist_to_opt,rate,rows_sampled,hessian_dev,wall_ms\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.loss,
            r.grad_norm,
            fmt_opt(r.dist_to_opt),
            fmt_opt(r.rate),
            r.rows_sampled,
            fmt_opt(r.hessian_dev),
            r.wall_ms
        );
    }
    let _ = writeln!(out, "# status={} {}", trace.status, config_echo);
    out
}

/// A^T W^2 A condition estimate is cheap; expose the regularizer floor used
/// by diagnostics.
pub fn reg_floor(inst: &ProblemInstance) -> f64 {
    let reg = reg_hessian(inst);
    sym_eigenvalues(&reg)[0]
}
