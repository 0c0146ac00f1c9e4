//! First-order calculus for the leverage objective: building-block
//! derivatives, the gradient g of L_b, its d x d Jacobian (the Hessian of
//! L_b) and the gradient of the full objective L.
//!
//! The Jacobian is assembled through one symmetric n x n kernel Phi with
//! J_g = 2 A_x^T Phi A_x,
//! Phi = -3 diag(M p) + 4 sigma o (sigma diag(p) sigma)
//!       - 2 (sigma^o2 diag(p) + diag(p) sigma^o2) + 2 M^2,
//! where sigma = Q Q^T, sigma^o2 is its entrywise square, M = sigma^o2 -
//! diag(f) and o is the Hadamard product. `PhiOperator` evaluates Phi * v in
//! O(n d^2) without materializing anything n x n; `gradient_kernel` builds
//! the dense kernel for diagnostics. Both routes are pinned against each
//! other and against central finite differences in the test suite.

use crate::error::{Error, Result};
use crate::leverage::{sigma_matrix, LeverageState};
use crate::numkit::{Matrix, Vector};
use crate::problem::{scale_rows, ProblemInstance};

/// Dense symmetric factor with J_g = 2 A_x^T Phi A_x.
#[derive(Debug, Clone)]
pub struct GradientKernel {
    pub phi: Matrix,
}

/// Matrix-free application of the kernel Phi.
pub struct PhiOperator<'a> {
    state: &'a LeverageState,
    /// C_p = Q^T diag(p) Q.
    c_p: Matrix,
    /// M p, the diagonal of the first kernel term.
    mp: Vector,
}

impl<'a> PhiOperator<'a> {
    pub fn new(state: &'a LeverageState) -> Self {
        let c_p = gram_weighted(&state.q, &state.p);
        let mp = {
            let s2p = quad_form_rows(&state.q, &c_p);
            s2p - state.f.component_mul(&state.p)
        };
        Self { state, c_p, mp }
    }

    /// sigma^o2 * v without forming sigma.
    fn sigma_had2(&self, v: &Vector) -> (Vector, Matrix) {
        let c_v = gram_weighted(&self.state.q, v);
        (quad_form_rows(&self.state.q, &c_v), c_v)
    }

    /// M * v = sigma^o2 v - f o v.
    pub fn apply_m(&self, v: &Vector) -> Vector {
        let (s2v, _) = self.sigma_had2(v);
        s2v - self.state.f.component_mul(v)
    }

    /// Phi * v.
    pub fn apply(&self, v: &Vector) -> Vector {
        let q = &self.state.q;
        let f = &self.state.f;
        let p = &self.state.p;

        let (s2v, c_v) = self.sigma_had2(v);
        let mv = &s2v - &f.component_mul(v);

        // -3 diag(Mp) v
        let t1 = self.mp.component_mul(v) * -3.0;
        // 4 [sigma o (sigma diag(p) sigma)] v ; entry i = q_i^T C_v C_p q_i
        let t2 = quad_form_rows_product(q, &c_v, &self.c_p) * 4.0;
        // -2 (sigma^o2 (p o v) + p o (sigma^o2 v))
        let (s2pv, _) = self.sigma_had2(&p.component_mul(v));
        let t3 = (s2pv + p.component_mul(&s2v)) * -2.0;
        // 2 M (M v)
        let t4 = self.apply_m(&mv) * 2.0;

        t1 + t2 + t3 + t4
    }

    /// 2 A_x^T Phi (A_x y): one Jacobian-vector product J_g y.
    pub fn jacobian_vec(&self, y: &Vector) -> Vector {
        let axy = &self.state.ax * y;
        self.state.ax.transpose() * self.apply(&axy) * 2.0
    }
}

/// Q^T diag(w) Q for a weight vector w.
fn gram_weighted(q: &Matrix, w: &Vector) -> Matrix {
    let qw = scale_rows(q, w);
    q.transpose() * qw
}

/// Entry i = q_i^T X q_i for the rows q_i of Q.
fn quad_form_rows(q: &Matrix, x: &Matrix) -> Vector {
    let y = q * x;
    Vector::from_fn(q.nrows(), |i, _| {
        let mut acc = 0.0;
        for j in 0..q.ncols() {
            acc += y[(i, j)] * q[(i, j)];
        }
        acc
    })
}

/// Entry i = q_i^T (X Y) q_i.
fn quad_form_rows_product(q: &Matrix, x: &Matrix, y: &Matrix) -> Vector {
    let xy = x * y;
    quad_form_rows(q, &xy)
}

/// Derivative of the projection sigma with respect to x_j:
/// 2 sigma diag(a_j) sigma - diag(a_j) sigma - sigma diag(a_j),
/// with a_j the j-th column of A_x.
pub fn d_sigma_dxj(state: &LeverageState, j: usize) -> Result<Matrix> {
    let d = state.d();
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, dim: d });
    }
    let sig = sigma_matrix(state);
    let aj: Vector = state.ax.column(j).into();
    let sig_daj = scale_cols(&sig, &aj);
    let daj_sig = scale_rows(&sig, &aj);
    Ok(&sig_daj * &sig * 2.0 - daj_sig - sig_daj)
}

fn scale_cols(m: &Matrix, scale: &Vector) -> Matrix {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(i, j)] *= scale[j];
        }
    }
    out
}

/// Derivative of the leverage-score vector f with respect to x_j:
/// entry i is 2 (sigma^o2 a_j)_i - 2 f_i a_{j,i}.
pub fn d_f_dxj(state: &LeverageState, j: usize) -> Result<Vector> {
    let d = state.d();
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, dim: d });
    }
    let aj: Vector = state.ax.column(j).into();
    let c = gram_weighted(&state.q, &aj);
    let s2a = quad_form_rows(&state.q, &c);
    Ok((s2a - state.f.component_mul(&aj)) * 2.0)
}

/// Gradient of L_b: g = 2 A_x^T (sigma^o2 - diag(f)) p.
pub fn grad_lb(state: &LeverageState) -> Vector {
    let op = PhiOperator::new(state);
    state.ax.transpose() * &op.mp * 2.0
}

/// Materialize the symmetric kernel Phi.
pub fn gradient_kernel(state: &LeverageState) -> GradientKernel {
    let sig = sigma_matrix(state);
    let sig2 = sig.component_mul(&sig);
    let p = &state.p;
    let m = &sig2 - Matrix::from_diagonal(&state.f);
    let mp = &m * p;

    let sig_dp_sig = scale_cols(&sig, p) * &sig;
    let had = sig.component_mul(&sig_dp_sig);
    let sig2_dp = scale_cols(&sig2, p);
    let dp_sig2 = scale_rows(&sig2, p);

    let phi =
        Matrix::from_diagonal(&mp) * -3.0 + had * 4.0 - (sig2_dp + dp_sig2) * 2.0 + &m * &m * 2.0;
    GradientKernel {
        phi: (&phi + phi.transpose()) * 0.5,
    }
}

/// Jacobian of g, equal to 2 A_x^T Phi A_x; this is the Hessian of L_b and is
/// returned symmetrized.
pub fn jacobian_g(state: &LeverageState) -> Matrix {
    let op = PhiOperator::new(state);
    let d = state.d();
    let mut jac = Matrix::zeros(d, d);
    for j in 0..d {
        let aj: Vector = state.ax.column(j).into();
        let col = state.ax.transpose() * op.apply(&aj) * 2.0;
        jac.set_column(j, &col);
    }
    (&jac + jac.transpose()) * 0.5
}

/// Gradient of the full objective:
/// J_g^T (g - c) + A^T diag(w o w) A x.
pub fn grad_l(inst: &ProblemInstance, state: &LeverageState) -> Vector {
    let op = PhiOperator::new(state);
    let g = state.ax.transpose() * &op.mp * 2.0;
    let q_res = g - &inst.c;
    let lc_part = op.jacobian_vec(&q_res);

    let ax_vec = &inst.a * &state.x;
    let ww = inst.w.component_mul(&inst.w);
    let reg_part = inst.a.transpose() * ww.component_mul(&ax_vec);
    lc_part + reg_part
}

/// Full objective value: 0.5 ||g(x) - c||^2 + 0.5 ||diag(w) A x||^2.
pub fn loss_l(inst: &ProblemInstance, state: &LeverageState) -> f64 {
    let g = grad_lb(state);
    let q_res = g - &inst.c;
    let ax_vec = &inst.a * &state.x;
    let weighted = inst.w.component_mul(&ax_vec);
    0.5 * q_res.norm_squared() + 0.5 * weighted.norm_squared()
}
