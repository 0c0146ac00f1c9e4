//! Leverage-score row subsampling: a sparse diagonal surrogate D~ for a
//! positive diagonal D with the spectral sandwich
//! (1 - eps0) A^T D A <= A^T D~ A <= (1 + eps0) A^T D A
//! holding with probability at least 1 - delta, plus an exact verifier.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::leverage::leverage_scores_plain;
use crate::numkit::{sym_eigenvalues, Matrix, SeededRng, Vector};
use crate::problem::scale_rows;

/// Conservative default oversampling constant.
pub const DEFAULT_CS: f64 = 40.0;

/// Sparse diagonal surrogate with its sampling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedDiag {
    /// Kept row ids, sorted ascending.
    pub indices: Vec<usize>,
    /// Matching surrogate values D_ii / p_i, all positive.
    pub values: Vec<f64>,
    pub n: usize,
    pub eps0: f64,
    pub delta: f64,
    /// Leverage scores of D^{1/2} A used for sampling.
    pub tau: Vector,
    /// Keep probabilities p_i = min(1, C_s tau_i log(n/delta) / eps0^2).
    pub probs: Vector,
    /// Oversampling constant the probabilities were built with.
    pub c_s: f64,
}

impl SketchedDiag {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Row budget ceil(C_s d log(n/delta) / eps0^2) implied by the sampling
    /// parameters.
    pub fn budget(&self, d: usize) -> usize {
        (self.c_s * d as f64 * (self.n as f64 / self.delta).ln() / (self.eps0 * self.eps0)).ceil()
            as usize
    }

    /// Assemble A^T D~ A from the kept rows.
    pub fn gram(&self, a: &Matrix) -> Matrix {
        let d = a.ncols();
        let mut out = Matrix::zeros(d, d);
        for (idx, val) in self.indices.iter().zip(self.values.iter()) {
            let row = a.row(*idx);
            for j in 0..d {
                for k in 0..d {
                    out[(j, k)] += val * row[j] * row[k];
                }
            }
        }
        out
    }

    /// Expand to the dense diagonal (zeros on dropped rows).
    pub fn dense_diag(&self) -> Vector {
        let mut v = Vector::zeros(self.n);
        for (idx, val) in self.indices.iter().zip(self.values.iter()) {
            v[*idx] = *val;
        }
        v
    }
}

/// Subsample a positive diagonal D with keep probabilities proportional to
/// the leverage scores of D^{1/2} A, rescaling kept entries by 1/p_i so the
/// surrogate is unbiased. Uses the default oversampling constant.
pub fn subsample_diag(
    a: &Matrix,
    d_diag: &Vector,
    eps0: f64,
    delta: f64,
    rng: &mut SeededRng,
) -> Result<SketchedDiag> {
    subsample_diag_with_cs(a, d_diag, eps0, delta, DEFAULT_CS, rng)
}

/// `subsample_diag` with an explicit oversampling constant.
pub fn subsample_diag_with_cs(
    a: &Matrix,
    d_diag: &Vector,
    eps0: f64,
    delta: f64,
    c_s: f64,
    rng: &mut SeededRng,
) -> Result<SketchedDiag> {
    let n = a.nrows();
    if d_diag.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "subsample_diag: D has length {}, A has {n} rows",
                d_diag.len()
            ),
        });
    }
    if !(0.0..1.0).contains(&eps0) || eps0 <= 0.0 {
        return Err(Error::BadRange {
            context: format!("eps0 must lie in (0, 1), got {eps0}"),
        });
    }
    if !(0.0..1.0).contains(&delta) || delta <= 0.0 {
        return Err(Error::BadRange {
            context: format!("delta must lie in (0, 1), got {delta}"),
        });
    }
    if c_s <= 0.0 {
        return Err(Error::BadRange {
            context: format!("C_s must be positive, got {c_s}"),
        });
    }
    for (i, v) in d_diag.iter().enumerate() {
        if !v.is_finite() || *v <= 0.0 {
            return Err(Error::NonPositiveWeight { row: i, value: *v });
        }
    }

    let sqrt_d = d_diag.map(|v| v.sqrt());
    let weighted = scale_rows(a, &sqrt_d);
    let tau = leverage_scores_plain(&weighted)?;

    let mult = c_s * (n as f64 / delta).ln() / (eps0 * eps0);
    let probs = tau.map(|t| (mult * t).min(1.0));

    // One sequential pass keeps the draw count independent of the outcome,
    // so equal seeds give equal sketches.
    let coins = rng.draw_uniform(n);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        if coins[i] < probs[i] {
            indices.push(i);
            values.push(d_diag[i] / probs[i]);
        }
    }
    Ok(SketchedDiag {
        indices,
        values,
        n,
        eps0,
        delta,
        tau,
        probs,
        c_s,
    })
}

/// Extreme generalized eigenvalues of (A^T D~ A, A^T D A) and whether they
/// fall inside [1 - eps0, 1 + eps0].
pub fn sandwich_check(a: &Matrix, d_diag: &Vector, sk: &SketchedDiag) -> Result<(bool, f64, f64)> {
    let gram = {
        let weighted = scale_rows(a, d_diag);
        a.transpose() * weighted
    };
    let gram_sk = sk.gram(a);

    let chol = Cholesky::new(gram.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        context: "sandwich_check: A^T D A is not positive definite".to_string(),
    })?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "sandwich_check: Cholesky factor not invertible".to_string(),
        })?;
    let reduced = &l_inv * gram_sk * l_inv.transpose();
    let eig = sym_eigenvalues(&reduced);
    let lo = eig[0];
    let hi = *eig.last().unwrap();
    let slack = 1e-9;
    let holds = lo >= 1.0 - sk.eps0 - slack && hi <= 1.0 + sk.eps0 + slack;
    Ok((holds, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::psd_order_check;
    use crate::testutil::max_abs;

    /// Tall matrix whose leverage mass concentrates on the first d rows, so
    /// tail rows get genuinely fractional keep probabilities.
    pub(crate) fn concentrated_matrix(
        rng: &mut SeededRng,
        n: usize,
        d: usize,
        tail: f64,
    ) -> Matrix {
        let mut m = rng.gaussian_matrix(n, d) * tail;
        for j in 0..d {
            for k in 0..d {
                m[(j, k)] = if j == k { 10.0 } else { 0.0 };
            }
        }
        m
    }

    #[test]
    fn all_probabilities_one_is_exact() {
        let mut rng = SeededRng::new(1);
        let a = rng.gaussian_matrix(30, 3);
        let d = Vector::from_element(30, 1.0);
        let sk = subsample_diag(&a, &d, 0.5, 0.05, &mut rng).unwrap();
        // At this size every p_i saturates at 1: the sketch is D itself.
        assert!(sk.probs.iter().all(|p| *p == 1.0));
        assert_eq!(sk.nnz(), 30);
        assert!(max_abs(&Matrix::from_diagonal(&(sk.dense_diag() - &d))) <= 1e-15);
        let (holds, lo, hi) = sandwich_check(&a, &d, &sk).unwrap();
        assert!(holds);
        assert!((lo - 1.0).abs() <= 1e-9 && (hi - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn square_identity_keeps_all_rows() {
        let mut rng = SeededRng::new(2);
        let a = Matrix::identity(5, 5);
        let d = Vector::from_element(5, 1.0);
        let sk = subsample_diag(&a, &d, 0.3, 0.05, &mut rng).unwrap();
        assert!(sk.tau.iter().all(|t| (t - 1.0).abs() <= 1e-12));
        assert_eq!(sk.nnz(), 5);
    }

    #[test]
    fn rejects_non_positive_weight() {
        let mut rng = SeededRng::new(3);
        let a = rng.gaussian_matrix(8, 2);
        let mut d = Vector::from_element(8, 1.0);
        d[4] = 0.0;
        assert!(matches!(
            subsample_diag(&a, &d, 0.5, 0.05, &mut rng),
            Err(Error::NonPositiveWeight { row: 4, .. })
        ));
    }

    #[test]
    fn rejects_bad_ranges() {
        let mut rng = SeededRng::new(3);
        let a = rng.gaussian_matrix(8, 2);
        let d = Vector::from_element(8, 1.0);
        assert!(subsample_diag(&a, &d, 0.0, 0.05, &mut rng).is_err());
        assert!(subsample_diag(&a, &d, 1.0, 0.05, &mut rng).is_err());
        assert!(subsample_diag(&a, &d, 0.5, 0.0, &mut rng).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let mut r1 = SeededRng::new(42);
        let mut r2 = SeededRng::new(42);
        let a = r1.gaussian_matrix(40, 3);
        let b = r2.gaussian_matrix(40, 3);
        assert_eq!(a, b);
        let d = Vector::from_element(40, 2.0);
        let s1 = subsample_diag(&a, &d, 0.5, 0.05, &mut r1).unwrap();
        let s2 = subsample_diag(&b, &d, 0.5, 0.05, &mut r2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn unbiased_on_fractional_probabilities() {
        let n = 20;
        let mut rng = SeededRng::new(8);
        // Tail scale keeps the fractional keep probabilities in the tens of
        // percent so the per-row means are solidly Gaussian at 1e4 draws.
        let a = concentrated_matrix(&mut rng, n, 3, 0.2);
        let d = Vector::from_fn(n, |i, _| 1.0 + (i as f64) / n as f64);
        // Small oversampling constant so the tail rows get p_i < 1.
        let c_s = 1.0;
        let total = 10_000usize;
        let mut mean = Vector::zeros(n);
        let mut any_fractional = false;
        for seed in 0..total {
            let mut draw_rng = SeededRng::new(seed as u64);
            let sk = subsample_diag_with_cs(&a, &d, 0.5, 0.05, c_s, &mut draw_rng).unwrap();
            any_fractional = any_fractional || sk.probs.iter().any(|p| *p < 1.0);
            mean += sk.dense_diag();
            // The realized row count stays under the sampling budget.
            assert!(sk.nnz() <= sk.budget(3));
        }
        assert!(any_fractional);
        mean /= total as f64;
        // Per-entry mean within 3 standard errors of D.
        let probs = {
            let mut rng = SeededRng::new(0);
            subsample_diag_with_cs(&a, &d, 0.5, 0.05, c_s, &mut rng)
                .unwrap()
                .probs
        };
        for i in 0..n {
            let p = probs[i];
            let var = if p < 1.0 {
                d[i] * d[i] * (1.0 - p) / p
            } else {
                0.0
            };
            let se = (var / total as f64).sqrt();
            assert!(
                (mean[i] - d[i]).abs() <= 3.0 * se + 1e-12,
                "row {i}: mean {} vs {} (se {se}, p {p})",
                mean[i],
                d[i]
            );
        }
    }

    #[test]
    fn sandwich_detects_scaling() {
        let mut rng = SeededRng::new(9);
        let a = rng.gaussian_matrix(20, 3);
        let d = Vector::from_element(20, 1.0);
        let mut sk = subsample_diag(&a, &d, 0.5, 0.05, &mut rng).unwrap();
        // Double every kept value: generalized eigenvalues land at 2.
        for v in sk.values.iter_mut() {
            *v *= 2.0;
        }
        let (holds, lo, hi) = sandwich_check(&a, &d, &sk).unwrap();
        assert!(!holds);
        assert!((lo - 2.0).abs() <= 1e-9 && (hi - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn verifiers_agree() {
        let mut rng = SeededRng::new(11);
        let a = concentrated_matrix(&mut rng, 80, 3, 0.05);
        let d = Vector::from_element(80, 1.0);
        for seed in 0..20u64 {
            let mut draw = SeededRng::new(seed);
            let sk = subsample_diag_with_cs(&a, &d, 0.4, 0.05, 2.0, &mut draw).unwrap();
            let (holds, _, _) = sandwich_check(&a, &d, &sk).unwrap();
            let gram = a.transpose() * scale_rows(&a, &d);
            let gram_sk = sk.gram(&a);
            let independent =
                psd_order_check(&gram_sk, &gram, 1.0 - sk.eps0, 1.0 + sk.eps0).unwrap();
            assert_eq!(holds, independent, "seed {seed}");
        }
    }
}
