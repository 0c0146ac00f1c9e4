//! Per-point leverage quantities: residuals, the row-rescaled matrix, the
//! projection diagonal and its residual.

use crate::error::{Error, Result};
use crate::numkit::{extreme_singular_values, qr_thin, Matrix, Vector};
use crate::problem::{scale_rows, validate_at, ProblemInstance};

/// Everything derived from one point x:
/// s = Ax - b, A_x = S_x^{-1} A, the thin orthonormal factor Q of A_x,
/// the projection diagonal f (leverage scores of A_x) and p = f - b.
#[derive(Debug, Clone)]
pub struct LeverageState {
    pub x: Vector,
    pub s: Vector,
    pub ax: Matrix,
    /// Thin orthonormal factor of A_x; the projection is Q Q^T.
    pub q: Matrix,
    /// Upper-triangular cofactor with Q * rf = A_x.
    pub rf: Matrix,
    /// Leverage scores: f_i = (Q Q^T)_{ii}, squared row norms of Q.
    pub f: Vector,
    /// Diagonal residual p = f - b.
    pub p: Vector,
}

impl LeverageState {
    pub fn n(&self) -> usize {
        self.ax.nrows()
    }

    pub fn d(&self) -> usize {
        self.ax.ncols()
    }
}

/// Extreme singular values of A_x at one point.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    /// sigma_min(A_x).
    pub beta: f64,
    /// ||A_x|| = sigma_max(A_x).
    pub rcap: f64,
    pub at_x: Vector,
}

/// Leverage scores of a full-column-rank matrix: squared row norms of its
/// thin orthonormal factor. They lie in [0, 1] and sum to the column count.
pub fn leverage_scores_plain(a: &Matrix) -> Result<Vector> {
    let (q, _) = qr_thin(a)?;
    Ok(row_norms_squared(&q))
}

fn row_norms_squared(q: &Matrix) -> Vector {
    Vector::from_fn(q.nrows(), |i, _| {
        let mut acc = 0.0;
        for j in 0..q.ncols() {
            acc += q[(i, j)] * q[(i, j)];
        }
        acc
    })
}

/// Build the full per-point state. Fails with `ZeroResidualRow` when some
/// residual entry is too close to zero and `RankDeficient` when A_x loses
/// rank.
pub fn build_state(inst: &ProblemInstance, x: &Vector) -> Result<LeverageState> {
    let report = validate_at(inst, x)?;
    if !report.pass {
        return Err(Error::ZeroResidualRow {
            row: report.worst_row,
            value: report.min_abs_residual,
            tol: report.tol,
        });
    }
    let s = &inst.a * x - &inst.b;
    let ax = scale_rows(&inst.a, &s.map(|v| 1.0 / v));
    let (q, rf) = qr_thin(&ax)?;
    let f = row_norms_squared(&q);
    let p = &f - &inst.b;
    Ok(LeverageState {
        x: x.clone(),
        s,
        ax,
        q,
        rf,
        f,
        p,
    })
}

/// Materialize the n x n projection sigma = Q Q^T. Only diagnostics and the
/// dense kernel need the full matrix; solvers stay on Q.
pub fn sigma_matrix(state: &LeverageState) -> Matrix {
    let raw = &state.q * state.q.transpose();
    (&raw + raw.transpose()) * 0.5
}

/// L_b value against an explicit target diagonal: 0.5 ||f - b||^2.
pub fn loss_lb(state: &LeverageState, b: &Vector) -> f64 {
    let diff = &state.f - b;
    0.5 * diff.norm_squared()
}

/// Measured beta = sigma_min(A_x) and R = ||A_x||.
pub fn spectral_profile(state: &LeverageState) -> SpectralProfile {
    let (rcap, beta) = extreme_singular_values(&state.ax);
    SpectralProfile {
        beta,
        rcap,
        at_x: state.x.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::SeededRng;
    use crate::problem::PlantSpec;

    fn max_abs(m: &Matrix) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn small_instance(a: Matrix, b: Vector) -> ProblemInstance {
        let n = a.nrows();
        let d = a.ncols();
        ProblemInstance {
            n,
            d,
            a,
            b,
            c: Vector::zeros(d),
            w: Vector::from_element(n, 1.0),
        }
    }

    #[test]
    fn plain_scores_square_invertible() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let tau = leverage_scores_plain(&a).unwrap();
        for t in tau.iter() {
            assert!((t - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn plain_scores_hand_case() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let tau = leverage_scores_plain(&a).unwrap();
        for t in tau.iter() {
            assert!((t - 2.0 / 3.0).abs() <= 1e-12, "tau = {t}");
        }
    }

    #[test]
    fn plain_scores_sum_to_d() {
        let mut rng = SeededRng::new(5);
        let a = rng.gaussian_matrix(40, 6);
        let tau = leverage_scores_plain(&a).unwrap();
        assert!((tau.sum() - 6.0).abs() <= 1e-8);
        assert!(tau.iter().all(|t| (-1e-12..=1.0 + 1e-12).contains(t)));
    }

    #[test]
    fn build_state_square_case() {
        let inst = small_instance(Matrix::identity(2, 2), Vector::zeros(2));
        let st = build_state(&inst, &Vector::from_row_slice(&[1.0, 2.0])).unwrap();
        assert_eq!(st.s, Vector::from_row_slice(&[1.0, 2.0]));
        assert!(
            max_abs(&(st.ax.clone() - Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5])))
                <= 1e-15
        );
        assert!(max_abs(&(sigma_matrix(&st) - Matrix::identity(2, 2))) <= 1e-12);
        assert!((st.f - Vector::from_element(2, 1.0)).amax() <= 1e-12);
    }

    #[test]
    fn build_state_hand_case() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let inst = small_instance(a, Vector::zeros(3));
        let st = build_state(&inst, &Vector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(st.s, Vector::from_row_slice(&[1.0, 1.0, 2.0]));
        let expect = Vector::from_row_slice(&[5.0 / 6.0, 5.0 / 6.0, 1.0 / 3.0]);
        assert!((st.f.clone() - expect).amax() <= 1e-12, "f = {:?}", st.f);
        assert!((st.f.sum() - 2.0).abs() <= 1e-8);
        // sigma diagonal equals f.
        let sig = sigma_matrix(&st);
        for i in 0..3 {
            assert!((sig[(i, i)] - st.f[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn build_state_rejects_zero_residual() {
        let inst = small_instance(Matrix::identity(2, 2), Vector::from_row_slice(&[1.0, 0.0]));
        let err = build_state(&inst, &Vector::from_row_slice(&[1.0, 5.0])).unwrap_err();
        assert!(matches!(err, Error::ZeroResidualRow { row: 0, .. }));
    }

    #[test]
    fn projection_invariants_on_battery() {
        for seed in 0..6u64 {
            let spec = PlantSpec::new(25, 4, seed);
            let (inst, x0) = crate::problem::gen_planted(&spec).unwrap();
            let st = build_state(&inst, &x0).unwrap();
            let sig = sigma_matrix(&st);
            assert!(max_abs(&(&sig * &sig - &sig)) <= 1e-10);
            assert!(max_abs(&(sig.transpose() - &sig)) <= 1e-12);
            assert!((sig.trace() - 4.0).abs() <= 1e-8);
            assert!(st.f.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
            // ||diag(p)|| <= 2 whenever ||b||_2 <= 1.
            if inst.b.norm() <= 1.0 {
                assert!(st.p.amax() <= 2.0 + 1e-10);
            }
        }
    }

    #[test]
    fn qr_path_matches_brute_path() {
        let spec = PlantSpec::new(18, 3, 77);
        let (inst, x0) = crate::problem::gen_planted(&spec).unwrap();
        let st = build_state(&inst, &x0).unwrap();
        let brute = crate::oracle::brute_sigma(&st.ax).unwrap();
        assert!(max_abs(&(sigma_matrix(&st) - brute)) <= 1e-9);
    }

    #[test]
    fn loss_lb_cases() {
        let inst = small_instance(Matrix::identity(3, 3), Vector::zeros(3));
        let st = build_state(&inst, &Vector::from_row_slice(&[1.0, 1.0, 1.0])).unwrap();
        // b = f gives zero loss.
        assert_eq!(loss_lb(&st, &st.f.clone()), 0.0);
        // Square invertible case: f = 1, so b = 0 gives n/2.
        assert!((loss_lb(&st, &Vector::zeros(3)) - 1.5).abs() <= 1e-12);

        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let inst = small_instance(a, Vector::zeros(3));
        let st = build_state(&inst, &Vector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert!((loss_lb(&st, &Vector::zeros(3)) - 0.75).abs() <= 1e-12);
    }

    #[test]
    fn spectral_profile_diag_case() {
        let inst = small_instance(Matrix::identity(2, 2), Vector::zeros(2));
        let st = build_state(&inst, &Vector::from_row_slice(&[1.0, 2.0])).unwrap();
        let prof = spectral_profile(&st);
        assert!((prof.beta - 0.5).abs() <= 1e-12);
        assert!((prof.rcap - 1.0).abs() <= 1e-12);

        // Doubling the residuals halves both extremes.
        let st2 = build_state(&inst, &Vector::from_row_slice(&[2.0, 4.0])).unwrap();
        let prof2 = spectral_profile(&st2);
        assert!((prof2.beta - 0.25).abs() <= 1e-12);
        assert!((prof2.rcap - 0.5).abs() <= 1e-12);
        assert!(prof2.beta <= prof2.rcap);
    }
}
