//! Standalone leverage-score subsampling and its spectral guarantee.
//!
//! Sketches a concentrated-leverage matrix over many seeds, verifies the
//! sandwich (1 - eps0) A^T D A <= A^T D~ A <= (1 + eps0) A^T D A with two
//! independent verifiers, and shows how few rows the sketch touches when the
//! leverage mass is concentrated.

use levinv::numkit::{SeededRng, Vector};
use levinv::oracle::psd_order_check;
use levinv::problem::scale_rows;
use levinv::sketch::{sandwich_check, subsample_diag, subsample_diag_with_cs};

fn main() {
    // Uniform-leverage Gaussian matrix at moderate size: the conservative
    // default oversampling keeps every row, so the sketch is exact.
    let mut rng = SeededRng::new(1);
    let a = rng.gaussian_matrix(500, 4);
    let d = Vector::from_element(500, 1.0);
    let sk = subsample_diag(&a, &d, 0.5, 0.05, &mut rng).unwrap();
    let (holds, lo, hi) = sandwich_check(&a, &d, &sk).unwrap();
    println!(
        "uniform 500x4, eps0 = 0.5: kept {}/{} rows (budget {}), sandwich [{lo:.4}, {hi:.4}] holds = {holds}",
        sk.nnz(),
        sk.n,
        sk.budget(4)
    );

    // Concentrated leverage at n = 10000: the sketch touches a few percent
    // of the rows.
    let n = 10_000;
    let mut a = rng.gaussian_matrix(n, 5) * 0.007;
    for j in 0..5 {
        for k in 0..5 {
            a[(j, k)] = if j == k { 10.0 } else { 0.0 };
        }
    }
    let d = Vector::from_element(n, 1.0);
    let sk = subsample_diag(&a, &d, 0.25, 0.05, &mut rng).unwrap();
    let (holds, lo, hi) = sandwich_check(&a, &d, &sk).unwrap();
    println!(
        "concentrated {n}x5, eps0 = 0.25: kept {} rows ({:.2}% of n), sandwich [{lo:.4}, {hi:.4}] holds = {holds}",
        sk.nnz(),
        100.0 * sk.nnz() as f64 / n as f64
    );

    // Fractional sampling with a deliberately tiny oversampling constant:
    // some sketches fail the window, and both verifiers always agree.
    let mut a = rng.gaussian_matrix(300, 3) * 0.5;
    for j in 0..3 {
        for k in 0..3 {
            a[(j, k)] = if j == k { 10.0 } else { 0.0 };
        }
    }
    let d = Vector::from_element(300, 1.0);
    let gram = a.transpose() * scale_rows(&a, &d);
    let mut held = 0;
    let mut agreements = 0;
    let trials = 50;
    for seed in 0..trials {
        let mut draw = SeededRng::new(3000 + seed);
        let sk = subsample_diag_with_cs(&a, &d, 0.25, 0.05, 0.1, &mut draw).unwrap();
        let (h, _, _) = sandwich_check(&a, &d, &sk).unwrap();
        let indep = psd_order_check(&sk.gram(&a), &gram, 0.75, 1.25).unwrap();
        held += h as usize;
        agreements += (h == indep) as usize;
    }
    println!(
        "undersampled 300x3 over {trials} seeds: sandwich held {held}/{trials}; verifier agreement {agreements}/{trials}"
    );
}
