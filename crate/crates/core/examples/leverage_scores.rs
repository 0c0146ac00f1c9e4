//! Leverage scores and the per-point projection state.
//!
//! Builds the state for a small matrix at a chosen point x: the residuals
//! s = Ax - b, the rescaled matrix A_x = diag(s)^{-1} A, its leverage scores
//! f (the projection diagonal), and the projection facts that every state
//! must satisfy.

use levinv::leverage::{build_state, leverage_scores_plain, sigma_matrix, spectral_profile};
use levinv::numkit::{Matrix, Vector};
use levinv::problem::ProblemInstance;

fn main() {
    let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    println!("A =\n{a}");

    let tau = leverage_scores_plain(&a).unwrap();
    println!("plain leverage scores of A: {:?}", tau.as_slice());
    println!("sum = {} (column count {})\n", tau.sum(), a.ncols());

    let inst = ProblemInstance {
        n: 3,
        d: 2,
        a,
        b: Vector::from_row_slice(&[0.1, -0.2, 0.3]),
        c: Vector::zeros(2),
        w: Vector::from_element(3, 1.0),
    };
    let x = Vector::from_row_slice(&[1.0, 1.0]);
    let st = build_state(&inst, &x).unwrap();
    println!("at x = {:?}:", x.as_slice());
    println!("  s = Ax - b       = {:?}", st.s.as_slice());
    println!("  f (scores of A_x) = {:?}", st.f.as_slice());
    println!("  p = f - b         = {:?}", st.p.as_slice());

    let sig = sigma_matrix(&st);
    let idem = (&sig * &sig - &sig).amax();
    println!("  trace(sigma) = {} (= d)", sig.trace());
    println!("  ||sigma^2 - sigma||_max = {idem:.2e} (projection)");

    let prof = spectral_profile(&st);
    println!("  beta = sigma_min(A_x) = {:.6}", prof.beta);
    println!("  R    = ||A_x||        = {:.6}", prof.rcap);
}
