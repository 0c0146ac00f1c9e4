//! Second-order structure: the Gauss-Newton kernel B1, the second-order
//! contraction T, the assembled Hessian of L, the inner matrix G and the
//! bound ledger that measures every analytic bound the theory claims.

use crate::calculus::{grad_lb, jacobian_g, PhiOperator};
use crate::error::{Error, Result};
use crate::leverage::{build_state, spectral_profile, LeverageState};
use crate::numkit::{spectral_norm, sym_eigenvalues, Matrix, SeededRng, Vector};
use crate::problem::{scale_rows, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMode {
    /// Gauss-Newton part plus the second-order contraction.
    Full,
    /// Gauss-Newton part only; exact once the residual g - c vanishes.
    GaussNewton,
}

/// Assembled Hessian with its three summands kept separate.
#[derive(Debug, Clone)]
pub struct HessianBundle {
    pub h: Matrix,
    /// J_g^T J_g.
    pub b1_part: Matrix,
    /// Second-order contraction sum_k q_k Hess(g_k); zero in Gauss-Newton mode.
    pub t_part: Matrix,
    /// A^T W^2 A.
    pub reg_part: Matrix,
    pub mode: HessianMode,
}

/// Measured norms and bound verdicts at sampled points.
#[derive(Debug, Clone)]
pub struct BoundLedger {
    /// min sigma_min(A_x) over the sampled states.
    pub beta: f64,
    /// max ||A_x|| over the sampled states.
    pub rcap: f64,
    pub norm_b1: f64,
    pub norm_b: f64,
    pub norm_g: f64,
    /// Smallest Hessian eigenvalue seen across the sampled points.
    pub pd_floor: f64,
    pub lipschitz_ratio_max: f64,
    pub b1_limit: f64,
    pub b_limit: f64,
    pub lipschitz_limit: f64,
    pub b1_ok: bool,
    pub b_ok: bool,
    pub lipschitz_ok: bool,
}

/// Dense n x n Gauss-Newton kernel B1 = 4 Phi (A_x A_x^T) Phi, built as the
/// square (2 Phi A_x)(2 Phi A_x)^T so that A_x^T B1 A_x = J_g^T J_g exactly
/// and positive semidefiniteness is structural.
pub fn kernel_b1(state: &LeverageState) -> Matrix {
    let y = phi_ax(state);
    &y * y.transpose()
}

/// Columns of 2 Phi A_x.
fn phi_ax(state: &LeverageState) -> Matrix {
    let op = PhiOperator::new(state);
    let n = state.n();
    let d = state.d();
    let mut y = Matrix::zeros(n, d);
    for j in 0..d {
        let aj: Vector = state.ax.column(j).into();
        y.set_column(j, &(op.apply(&aj) * 2.0));
    }
    y
}

/// Diagonal of B1 without materializing anything n x n.
pub fn kernel_b1_diag(state: &LeverageState) -> Vector {
    let y = phi_ax(state);
    Vector::from_fn(state.n(), |i, _| {
        let mut acc = 0.0;
        for j in 0..y.ncols() {
            acc += y[(i, j)] * y[(i, j)];
        }
        acc
    })
}

/// Second-order contraction T_{jk} = d/dx_k [ (J_g(x)^T q0)_j ] with the
/// residual q0 = g(x) - c frozen, by central differences of the analytic
/// Jacobian-vector map with one Richardson refinement. The probe step shrinks
/// tenfold up to three times when a probe leaves the feasible region.
pub fn second_order_t(inst: &ProblemInstance, state: &LeverageState) -> Result<Matrix> {
    let d = state.d();
    let q0 = grad_lb(state) - &inst.c;
    let x = &state.x;

    let jtq = |y: &Vector| -> Result<Vector> {
        let st = build_state(inst, y)?;
        let op = PhiOperator::new(&st);
        Ok(op.jacobian_vec(&q0))
    };

    let column_at = |k: usize, h: f64| -> Result<Vector> {
        let mut xp = x.clone();
        xp[k] += h;
        let mut xm = x.clone();
        xm[k] -= h;
        Ok((jtq(&xp)? - jtq(&xm)?) / (2.0 * h))
    };

    let mut t = Matrix::zeros(d, d);
    for k in 0..d {
        let mut h = 1e-4 * x[k].abs().max(1.0);
        let mut col = None;
        for shrink in 0..4 {
            match (column_at(k, h), column_at(k, h * 0.5)) {
                (Ok(c1), Ok(c2)) => {
                    col = Some((c2 * 4.0 - c1) / 3.0);
                    break;
                }
                (r1, r2) => {
                    if shrink == 3 {
                        let err = r1.err().or(r2.err()).unwrap();
                        return Err(err);
                    }
                    h *= 0.1;
                }
            }
        }
        t.set_column(k, &col.expect("column computed or error returned"));
    }
    Ok((&t + t.transpose()) * 0.5)
}

/// Hessian of L at the state's point.
pub fn hessian_l(
    inst: &ProblemInstance,
    state: &LeverageState,
    mode: HessianMode,
) -> Result<HessianBundle> {
    let jac = jacobian_g(state);
    let b1_part = jac.transpose() * &jac;
    let t_part = match mode {
        HessianMode::Full => second_order_t(inst, state)?,
        HessianMode::GaussNewton => Matrix::zeros(state.d(), state.d()),
    };
    let reg_part = reg_hessian(inst);
    let h = &b1_part + &t_part + &reg_part;
    Ok(HessianBundle {
        h: (&h + h.transpose()) * 0.5,
        b1_part,
        t_part,
        reg_part,
        mode,
    })
}

/// A^T W^2 A, the constant Hessian of the regularizer.
pub fn reg_hessian(inst: &ProblemInstance) -> Matrix {
    let ww = inst.w.component_mul(&inst.w);
    inst.a.transpose() * scale_rows(&inst.a, &ww)
}

/// G = S_x^{-1} B S_x^{-1} for a symmetric kernel B.
pub fn inner_g(state: &LeverageState, b: &Matrix) -> Matrix {
    let inv_s = state.s.map(|v| 1.0 / v);
    let mut out = b.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            out[(i, j)] *= inv_s[i] * inv_s[j];
        }
    }
    out
}

/// Lift the d x d contraction T to an n x n kernel B2 with
/// A_x^T B2 A_x = T, via B2 = Y T Y^T, Y = A_x (A_x^T A_x)^{-1}.
pub fn lift_t_kernel(state: &LeverageState, t: &Matrix) -> Result<Matrix> {
    let rf_inv = state
        .rf
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient {
            context: "lift_t_kernel: triangular factor not invertible".to_string(),
        })?;
    // A_x Gram^{-1} = Q R^{-T}.
    let y = &state.q * rf_inv.transpose();
    Ok(&y * t * y.transpose())
}

/// Diagonal of the lifted kernel, recovered with d solves instead of an
/// n x n product.
pub fn lift_t_diag(state: &LeverageState, t: &Matrix) -> Result<Vector> {
    let rf_inv = state
        .rf
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient {
            context: "lift_t_diag: triangular factor not invertible".to_string(),
        })?;
    let y = &state.q * rf_inv.transpose();
    let yt = &y * t;
    Ok(Vector::from_fn(y.nrows(), |i, _| {
        let mut acc = 0.0;
        for j in 0..y.ncols() {
            acc += yt[(i, j)] * y[(i, j)];
        }
        acc
    }))
}

/// Measure the paper's spectral and Lipschitz bounds around a state.
///
/// Hypotheses checked up front: ||b||_2 <= 1 and ||c||_2 <= 1. beta and R are
/// the extreme singular values of A_x, taken worst-case over the sampled
/// points, and every verdict compares a measured quantity against its
/// analytic limit.
pub fn bound_ledger(
    inst: &ProblemInstance,
    state: &LeverageState,
    pairs: usize,
    radius: f64,
    rng: &mut SeededRng,
) -> Result<BoundLedger> {
    let b_norm = inst.b.norm();
    if b_norm > 1.0 + 1e-12 {
        return Err(Error::HypothesisViolated {
            which: format!("||b||_2 = {b_norm} > 1"),
        });
    }
    let c_norm = inst.c.norm();
    if c_norm > 1.0 + 1e-12 {
        return Err(Error::HypothesisViolated {
            which: format!("||c||_2 = {c_norm} > 1"),
        });
    }

    let b1 = kernel_b1(state);
    let t = second_order_t(inst, state)?;
    let b2 = lift_t_kernel(state, &t)?;
    let b_kernel = &b1 + &b2;
    let norm_b1 = spectral_norm(&b1);
    let norm_b = spectral_norm(&b_kernel);
    let norm_g = spectral_norm(&inner_g(state, &b_kernel));

    let profile = spectral_profile(state);
    let mut beta = profile.beta;
    let mut rcap = profile.rcap;

    let center_bundle = hessian_l(inst, state, HessianMode::Full)?;
    let mut pd_floor = sym_eigenvalues(&center_bundle.h)[0];

    let mut lip_max: f64 = 0.0;
    for _ in 0..pairs {
        let (xa, ha) = sample_hessian(inst, state, radius, rng)?;
        let (xb, hb) = sample_hessian(inst, state, radius, rng)?;
        let gap = (&xa.1 - &xb.1).norm();
        if gap > 1e-12 {
            lip_max = lip_max.max(spectral_norm(&(&ha - &hb)) / gap);
        }
        for (prof, h) in [(xa.0, ha), (xb.0, hb)] {
            beta = beta.min(prof.beta);
            rcap = rcap.max(prof.rcap);
            pd_floor = pd_floor.min(sym_eigenvalues(&h)[0]);
        }
    }

    let b1_limit = 4100.0;
    let b_limit = 12000.0 * beta * rcap;
    let lipschitz_limit = 1_024_000.0 * beta.powi(-7) * rcap.powi(6);
    Ok(BoundLedger {
        beta,
        rcap,
        norm_b1,
        norm_b,
        norm_g,
        pd_floor,
        lipschitz_ratio_max: lip_max,
        b1_limit,
        b_limit,
        lipschitz_limit,
        b1_ok: norm_b1 <= b1_limit,
        b_ok: norm_b <= b_limit,
        lipschitz_ok: lip_max <= lipschitz_limit,
    })
}

type SampledPoint = (crate::leverage::SpectralProfile, Vector);

fn sample_hessian(
    inst: &ProblemInstance,
    state: &LeverageState,
    radius: f64,
    rng: &mut SeededRng,
) -> Result<(SampledPoint, Matrix)> {
    for _ in 0..50 {
        let x = &state.x + rng.ball_point(state.d(), radius);
        if let Ok(st) = build_state(inst, &x) {
            let h = hessian_l(inst, &st, HessianMode::Full)?.h;
            return Ok(((spectral_profile(&st), x), h));
        }
    }
    Err(Error::ProbeInfeasible {
        context: format!("no feasible sample found in ball of radius {radius}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::loss_l;
    use crate::oracle::{fd_hessian, FdPlan};
    use crate::problem::{gen_planted, PlantSpec};
    use crate::testutil::{feasible_point, max_abs, rel_err_mat};

    #[test]
    fn kernel_b1_square_case_vanishes() {
        let inst = ProblemInstance {
            n: 2,
            d: 2,
            a: Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]),
            b: Vector::from_row_slice(&[0.5, -0.5]),
            c: Vector::zeros(2),
            w: Vector::from_element(2, 1.0),
        };
        let st = build_state(&inst, &Vector::zeros(2)).unwrap();
        assert!(max_abs(&kernel_b1(&st)) <= 1e-12);
    }

    #[test]
    fn kernel_b1_sandwich_equals_gauss_newton() {
        let spec = PlantSpec::new(14, 3, 30);
        let (inst, _) = gen_planted(&spec).unwrap();
        let mut rng = SeededRng::new(1);
        let x = feasible_point(&inst, 0.5, &mut rng);
        let st = build_state(&inst, &x).unwrap();
        let b1 = kernel_b1(&st);
        let jac = jacobian_g(&st);
        let lhs = st.ax.transpose() * &b1 * &st.ax;
        let rhs = jac.transpose() * &jac;
        assert!(rel_err_mat(&lhs, &rhs) <= 1e-10);
        // PSD by construction.
        let eig = sym_eigenvalues(&b1);
        assert!(eig[0] >= -1e-10 * eig.last().unwrap().abs().max(1.0));
        // Diagonal helper agrees with the dense kernel.
        let diag = kernel_b1_diag(&st);
        for i in 0..inst.n {
            assert!((diag[i] - b1[(i, i)]).abs() <= 1e-10 * (1.0 + b1[(i, i)].abs()));
        }
    }

    #[test]
    fn second_order_t_zero_residual() {
        let spec = PlantSpec::new(10, 2, 5);
        let (inst, x0) = gen_planted(&spec).unwrap();
        let st = build_state(&inst, &x0).unwrap();
        // q = g(0) - c = 0 at the plant point, so the contraction vanishes.
        let t = second_order_t(&inst, &st).unwrap();
        assert!(max_abs(&t) <= 1e-8);
    }

    #[test]
    fn second_order_t_square_case() {
        let inst = ProblemInstance {
            n: 2,
            d: 2,
            a: Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            b: Vector::from_row_slice(&[0.4, -0.6]),
            c: Vector::from_row_slice(&[0.3, 0.2]),
            w: Vector::from_element(2, 1.0),
        };
        let st = build_state(&inst, &Vector::zeros(2)).unwrap();
        // g vanishes identically when n = d, so every probe is zero.
        let t = second_order_t(&inst, &st).unwrap();
        assert!(max_abs(&t) <= 1e-12);
    }

    #[test]
    fn gauss_newton_gap_bounded_by_residual() {
        // ||H_full - H_GN|| = ||T|| stays within 10 ||q|| Lip(J_g).
        let spec = PlantSpec::new(24, 3, 12);
        let (inst, _) = gen_planted(&spec).unwrap();
        let mut rng = SeededRng::new(5);
        let x = feasible_point(&inst, 0.4, &mut rng);
        let st = build_state(&inst, &x).unwrap();

        let full = hessian_l(&inst, &st, HessianMode::Full).unwrap();
        let gn = hessian_l(&inst, &st, HessianMode::GaussNewton).unwrap();
        let gap = spectral_norm(&(&full.h - &gn.h));

        let q_norm = (crate::calculus::grad_lb(&st) - &inst.c).norm();
        let mut lip_jg = 0.0f64;
        let mut prev: Option<(Vector, Matrix)> = None;
        for _ in 0..6 {
            let y = &x + rng.ball_point(inst.d, 1e-3);
            if let Ok(sty) = build_state(&inst, &y) {
                let j = jacobian_g(&sty);
                if let Some((py, pj)) = prev.take() {
                    let dist = (&y - &py).norm();
                    if dist > 1e-12 {
                        lip_jg = lip_jg.max(spectral_norm(&(&j - &pj)) / dist);
                    }
                }
                prev = Some((y, j));
            }
        }
        assert!(
            gap <= 10.0 * q_norm * lip_jg,
            "gap {gap} > 10 * {q_norm} * {lip_jg}"
        );
    }

    #[test]
    fn full_hessian_matches_fd() {
        let spec = PlantSpec::new(12, 3, 9);
        let (inst, _) = gen_planted(&spec).unwrap();
        let mut rng = SeededRng::new(3);
        let x = feasible_point(&inst, 0.5, &mut rng);
        let st = build_state(&inst, &x).unwrap();
        let bundle = hessian_l(&inst, &st, HessianMode::Full).unwrap();
        let fd = fd_hessian(
            |y| Ok(loss_l(&inst, &build_state(&inst, y)?)),
            &x,
            &FdPlan::new(1e-4, true).unwrap(),
        )
        .unwrap();
        assert!(
            rel_err_mat(&bundle.h, &fd) <= 5e-4,
            "err = {}",
            rel_err_mat(&bundle.h, &fd)
        );
    }

    #[test]
    fn hessian_planted_floor_and_gn_agreement() {
        let spec = PlantSpec::new(16, 3, 44);
        let (inst, x0) = gen_planted(&spec).unwrap();
        let st = build_state(&inst, &x0).unwrap();
        let full = hessian_l(&inst, &st, HessianMode::Full).unwrap();
        let gn = hessian_l(&inst, &st, HessianMode::GaussNewton).unwrap();
        let eig = sym_eigenvalues(&full.h);
        assert!(eig[0] >= spec.pd_margin * (1.0 - 1e-6));
        // T vanishes at the optimum, so the two modes agree.
        assert!(max_abs(&(&full.h - &gn.h)) <= 1e-8 * (1.0 + max_abs(&full.h)));
    }

    #[test]
    fn hessian_degenerate_identity_case() {
        let inst = ProblemInstance {
            n: 3,
            d: 3,
            a: Matrix::identity(3, 3),
            b: Vector::from_row_slice(&[1.0, 2.0, -1.0]),
            c: Vector::zeros(3),
            w: Vector::from_row_slice(&[2.0, 3.0, 0.5]),
        };
        let st = build_state(&inst, &Vector::zeros(3)).unwrap();
        let bundle = hessian_l(&inst, &st, HessianMode::Full).unwrap();
        let expect = Matrix::from_diagonal(&inst.w.component_mul(&inst.w));
        assert!(max_abs(&(&bundle.h - &expect)) <= 1e-10);
    }

    #[test]
    fn inner_g_cases() {
        let spec = PlantSpec::new(9, 2, 3);
        let (inst, x0) = gen_planted(&spec).unwrap();
        let st = build_state(&inst, &x0).unwrap();

        // S = I leaves B untouched.
        let mut st1 = st.clone();
        st1.s = Vector::from_element(inst.n, 1.0);
        let b0 = kernel_b1(&st);
        assert!(max_abs(&(inner_g(&st1, &b0) - &b0)) <= 1e-15);

        // B = I, s = 2 * ones gives 0.25 I.
        let mut st2 = st.clone();
        st2.s = Vector::from_element(inst.n, 2.0);
        let g = inner_g(&st2, &Matrix::identity(inst.n, inst.n));
        assert!(max_abs(&(&g - Matrix::identity(inst.n, inst.n) * 0.25)) <= 1e-15);

        // A^T G A = A_x^T B A_x.
        let b = kernel_b1(&st);
        let g = inner_g(&st, &b);
        let lhs = inst.a.transpose() * &g * &inst.a;
        let rhs = st.ax.transpose() * &b * &st.ax;
        assert!(rel_err_mat(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn lift_recovers_contraction() {
        let spec = PlantSpec::new(11, 3, 19);
        let (inst, _) = gen_planted(&spec).unwrap();
        let mut rng = SeededRng::new(6);
        let x = feasible_point(&inst, 0.5, &mut rng);
        let st = build_state(&inst, &x).unwrap();
        let t = second_order_t(&inst, &st).unwrap();
        let b2 = lift_t_kernel(&st, &t).unwrap();
        let back = st.ax.transpose() * &b2 * &st.ax;
        assert!(rel_err_mat(&back, &t) <= 1e-9);
        let diag = lift_t_diag(&st, &t).unwrap();
        for i in 0..inst.n {
            assert!((diag[i] - b2[(i, i)]).abs() <= 1e-10 * (1.0 + b2[(i, i)].abs()));
        }
    }

    #[test]
    fn ledger_requires_hypotheses() {
        // Unclamped planted c typically has ||c|| far above 1.
        let spec = PlantSpec::new(20, 3, 2);
        let (inst, x0) = gen_planted(&spec).unwrap();
        let st = build_state(&inst, &x0).unwrap();
        let mut rng = SeededRng::new(0);
        if inst.c.norm() > 1.0 {
            assert!(matches!(
                bound_ledger(&inst, &st, 2, 1e-3, &mut rng),
                Err(Error::HypothesisViolated { .. })
            ));
        }
    }

    #[test]
    fn ledger_on_conforming_instance() {
        let spec = PlantSpec::new(20, 3, 2).with_clamped_c();
        let (inst, x0) = gen_planted(&spec).unwrap();
        let st = build_state(&inst, &x0).unwrap();
        let mut rng = SeededRng::new(0);
        let ledger = bound_ledger(&inst, &st, 3, 1e-3, &mut rng).unwrap();
        assert!(
            ledger.b1_ok,
            "||B1|| = {} > {}",
            ledger.norm_b1, ledger.b1_limit
        );
        assert!(
            ledger.b_ok,
            "||B|| = {} > {}",
            ledger.norm_b, ledger.b_limit
        );
        assert!(ledger.lipschitz_ok);
        assert!(ledger.pd_floor >= spec.pd_margin * (1.0 - 1e-6));
    }
}
