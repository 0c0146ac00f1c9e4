//! Minimal dense linear-algebra and randomness layer.
//!
//! Every other module goes through these operations. The implementations
//! delegate to nalgebra; only the contracts below are relied upon elsewhere.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense row-indexed matrix of f64 used throughout the crate.
pub type Matrix = DMatrix<f64>;
/// Dense column vector of f64.
pub type Vector = DVector<f64>;

/// Relative rank tolerance for the thin QR factorization.
pub const RANK_TOL: f64 = 1e-12;

/// Thin QR factorization of an n x d matrix with n >= d.
///
/// Returns (Q, R) with Q n x d having orthonormal columns and R d x d upper
/// triangular so that Q * R = M. Fails with `RankDeficient` when the smallest
/// diagonal of R falls under `RANK_TOL` relative to the largest.
pub fn qr_thin(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let (n, d) = m.shape();
    if n < d || d == 0 {
        return Err(Error::DimensionMismatch {
            context: format!("qr_thin expects n >= d >= 1, got {n} x {d}"),
        });
    }
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let mut max_diag = 0.0f64;
    let mut min_diag = f64::INFINITY;
    for j in 0..d {
        let a = r[(j, j)].abs();
        max_diag = max_diag.max(a);
        min_diag = min_diag.min(a);
    }
    if !(min_diag.is_finite() && max_diag.is_finite()) || min_diag <= RANK_TOL * max_diag {
        return Err(Error::RankDeficient {
            context: format!(
                "qr_thin: min |R_jj| = {min_diag:e} <= {RANK_TOL:e} * max |R_jj| = {:e}",
                RANK_TOL * max_diag
            ),
        });
    }
    Ok((q, r))
}

/// Solve H x = v for symmetric positive definite H via Cholesky.
pub fn solve_spd(h: &Matrix, v: &Vector) -> Result<Vector> {
    let (n, m) = h.shape();
    if n != m || v.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!("solve_spd: H is {n} x {m}, v has length {}", v.len()),
        });
    }
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(h[(i, j)].abs());
            asym = asym.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * (1.0 + scale) {
        return Err(Error::NotPositiveDefinite {
            context: format!("solve_spd: asymmetry {asym:e} exceeds 1e-10 * (1 + {scale:e})"),
        });
    }
    match Cholesky::new(h.clone()) {
        Some(chol) => Ok(chol.solve(v)),
        None => Err(Error::NotPositiveDefinite {
            context: "solve_spd: Cholesky pivot failed".to_string(),
        }),
    }
}

/// Largest and smallest singular values of a nonempty matrix.
pub fn extreme_singular_values(m: &Matrix) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let mut hi = 0.0f64;
    let mut lo = f64::INFINITY;
    for s in sv.iter() {
        hi = hi.max(*s);
        lo = lo.min(*s);
    }
    if !lo.is_finite() {
        lo = 0.0;
    }
    (hi, lo)
}

/// Spectral norm, i.e. the largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    extreme_singular_values(m).0
}

/// Eigenvalues of a symmetric matrix, ascending. The input is symmetrized
/// first so 1e-15-level asymmetry from accumulated products cannot leak in.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Deterministic seeded random stream.
///
/// The same seed yields the same draw sequence on every platform. A stream is
/// single-owner: clone or derive substreams instead of sharing one across
/// tasks.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from the same seed. Substream ids let one
    /// user-facing seed drive generation, sketching and start points without
    /// the draws interleaving.
    pub fn substream(&self, id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(id);
        Self {
            inner,
            seed: self.seed,
        }
    }

    /// k uniform draws in [0, 1).
    pub fn draw_uniform(&mut self, k: usize) -> Vector {
        Vector::from_fn(k, |_, _| self.inner.gen::<f64>())
    }

    /// One uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// k standard normal draws.
    pub fn standard_normal(&mut self, k: usize) -> Vector {
        Vector::from_fn(k, |_, _| self.inner.sample(StandardNormal))
    }

    /// n x d matrix with independent standard normal entries.
    pub fn gaussian_matrix(&mut self, n: usize, d: usize) -> Matrix {
        // Row-major fill keeps the draw order independent of storage layout.
        let mut m = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                m[(i, j)] = self.inner.sample(StandardNormal);
            }
        }
        m
    }

    /// Uniform point on the sphere of the given radius.
    pub fn sphere_point(&mut self, dim: usize, radius: f64) -> Vector {
        loop {
            let g = self.standard_normal(dim);
            let norm = g.norm();
            if norm > 1e-12 {
                return g * (radius / norm);
            }
        }
    }

    /// Uniform point in the closed ball of the given radius.
    pub fn ball_point(&mut self, dim: usize, radius: f64) -> Vector {
        let r = radius * self.uniform().powf(1.0 / dim.max(1) as f64);
        self.sphere_point(dim, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &Matrix) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn qr_identity() {
        let m = Matrix::identity(3, 3);
        let (q, r) = qr_thin(&m).unwrap();
        // Up to column signs Q = R = I; the product must reproduce I exactly.
        assert!(max_abs(&(&q * &r - &m)) <= 1e-12);
        assert!(max_abs(&(q.transpose() * &q - Matrix::identity(3, 3))) <= 1e-12);
    }

    #[test]
    fn qr_rectangular_diag() {
        let m = Matrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
        let (q, r) = qr_thin(&m).unwrap();
        assert!(max_abs(&(&q * &r - &m)) <= 1e-12);
        assert!(max_abs(&(q.transpose() * &q - Matrix::identity(2, 2))) <= 1e-12);
        assert!((r[(0, 0)].abs() - 3.0).abs() <= 1e-12);
        assert!((r[(1, 1)].abs() - 4.0).abs() <= 1e-12);
        assert!(r[(1, 0)].abs() <= 1e-12);
    }

    #[test]
    fn qr_seeded_gaussian_residuals() {
        let mut rng = SeededRng::new(11);
        let m = rng.gaussian_matrix(20, 4);
        let (q, r) = qr_thin(&m).unwrap();
        let scale = 1.0 + max_abs(&m);
        assert!(max_abs(&(&q * &r - &m)) <= 1e-12 * scale);
        assert!(max_abs(&(q.transpose() * &q - Matrix::identity(4, 4))) <= 1e-12);
    }

    #[test]
    fn qr_rank_deficient() {
        // Duplicate columns: exactly rank 1.
        let m = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert!(matches!(qr_thin(&m), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn solve_spd_identity_and_diag() {
        let h = Matrix::identity(2, 2);
        let v = Vector::from_row_slice(&[5.0, 7.0]);
        let x = solve_spd(&h, &v).unwrap();
        assert_eq!(x, v);

        let h = Matrix::from_diagonal(&Vector::from_row_slice(&[2.0, 4.0]));
        let v = Vector::from_row_slice(&[2.0, 4.0]);
        let x = solve_spd(&h, &v).unwrap();
        assert!((x - Vector::from_element(2, 1.0)).norm() <= 1e-14);
    }

    #[test]
    fn solve_spd_multiply_back() {
        let mut rng = SeededRng::new(3);
        let g = rng.gaussian_matrix(6, 6);
        let h = g.transpose() * &g + Matrix::identity(6, 6);
        let v = rng.standard_normal(6);
        let x = solve_spd(&h, &v).unwrap();
        assert!((h * x - &v).norm() <= 1e-10 * v.norm());
    }

    #[test]
    fn solve_spd_rejects_indefinite() {
        let h = Matrix::from_diagonal(&Vector::from_row_slice(&[1.0, -1.0]));
        let v = Vector::from_row_slice(&[1.0, 1.0]);
        assert!(matches!(
            solve_spd(&h, &v),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn extreme_singular_values_basic() {
        let m = Matrix::from_diagonal(&Vector::from_row_slice(&[1.0, 3.0, 2.0]));
        let (hi, lo) = extreme_singular_values(&m);
        assert!((hi - 3.0).abs() <= 1e-12 && (lo - 1.0).abs() <= 1e-12);

        let z = Matrix::zeros(3, 2);
        assert_eq!(extreme_singular_values(&z), (0.0, 0.0));
    }

    #[test]
    fn extreme_singular_values_match_gram_eigs() {
        // Independent oracle: singular values squared are Gram eigenvalues.
        let mut rng = SeededRng::new(17);
        let m = rng.gaussian_matrix(10, 3);
        let (hi, lo) = extreme_singular_values(&m);
        let gram = m.transpose() * &m;
        let eig = sym_eigenvalues(&gram);
        let hi_ref = eig.last().unwrap().sqrt();
        let lo_ref = eig.first().unwrap().sqrt();
        assert!((hi - hi_ref).abs() <= 1e-8 * hi_ref);
        assert!((lo - lo_ref).abs() <= 1e-8 * hi_ref);
    }

    #[test]
    fn draw_uniform_deterministic() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        assert_eq!(a.draw_uniform(100), b.draw_uniform(100));
        assert_eq!(a.draw_uniform(0).len(), 0);
    }

    #[test]
    fn draw_uniform_mean() {
        let mut rng = SeededRng::new(1);
        let u = rng.draw_uniform(100_000);
        let mean = u.sum() / u.len() as f64;
        assert!((0.49..=0.51).contains(&mean), "mean = {mean}");
        assert!(u.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn substreams_do_not_collide() {
        let root = SeededRng::new(9);
        let a = root.substream(1).draw_uniform(8);
        let b = root.substream(2).draw_uniform(8);
        assert_ne!(a, b);
        // Same id replays the same stream.
        assert_eq!(a, root.substream(1).draw_uniform(8));
    }
}
