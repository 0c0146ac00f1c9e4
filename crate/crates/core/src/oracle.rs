//! Independent verification machinery: central finite differences, the
//! literal Gram-inverse projection, and an eigenvalue-based matrix-order
//! check. Everything here is slow, simple and deliberately disjoint from the
//! code paths it cross-checks: the projection goes through an explicit
//! inverse instead of QR, and the order check runs on a local Jacobi
//! eigensolver instead of the shared substrate.

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Vector};

/// Central finite-difference plan. Steps are per-coordinate:
/// h_j = base_step * max(1, |x_j|).
#[derive(Debug, Clone)]
pub struct FdPlan {
    pub base_step: f64,
    /// One Richardson refinement: combine the h and h/2 stencils.
    pub richardson: bool,
}

impl Default for FdPlan {
    fn default() -> Self {
        Self {
            base_step: 1e-5,
            richardson: false,
        }
    }
}

impl FdPlan {
    pub fn new(base_step: f64, richardson: bool) -> Result<Self> {
        if !(1e-8..=1e-3).contains(&base_step) {
            return Err(Error::BadRange {
                context: format!("fd base_step {base_step:e} outside [1e-8, 1e-3]"),
            });
        }
        Ok(Self {
            base_step,
            richardson,
        })
    }

    fn step(&self, xj: f64) -> f64 {
        self.base_step * xj.abs().max(1.0)
    }
}

fn probe<T>(r: std::result::Result<T, Error>, x: &Vector) -> Result<T> {
    r.map_err(|e| Error::ProbeInfeasible {
        context: format!("at probe point {:?}: {e}", x.as_slice()),
    })
}

/// Central-difference gradient of a scalar map.
pub fn fd_gradient<F>(f: F, x: &Vector, plan: &FdPlan) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<f64>,
{
    let d = x.len();
    let single = |h_scale: f64| -> Result<Vector> {
        let mut g = Vector::zeros(d);
        for j in 0..d {
            let h = plan.step(x[j]) * h_scale;
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fp = probe(f(&xp), &xp)?;
            let fm = probe(f(&xm), &xm)?;
            g[j] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    };
    let g1 = single(1.0)?;
    if plan.richardson {
        let g2 = single(0.5)?;
        Ok((g2 * 4.0 - g1) / 3.0)
    } else {
        Ok(g1)
    }
}

/// Central-difference Jacobian of a vector map, column by column.
pub fn fd_jacobian<F>(f: F, x: &Vector, plan: &FdPlan) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let d = x.len();
    let single = |h_scale: f64| -> Result<Matrix> {
        let mut jac: Option<Matrix> = None;
        for j in 0..d {
            let h = plan.step(x[j]) * h_scale;
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fp = probe(f(&xp), &xp)?;
            let fm = probe(f(&xm), &xm)?;
            let col = (fp - fm) / (2.0 * h);
            let jac = jac.get_or_insert_with(|| Matrix::zeros(col.len(), d));
            jac.set_column(j, &col);
        }
        jac.ok_or(Error::BadRange {
            context: "fd_jacobian on empty x".to_string(),
        })
    };
    let j1 = single(1.0)?;
    if plan.richardson {
        let j2 = single(0.5)?;
        Ok((j2 * 4.0 - j1) / 3.0)
    } else {
        Ok(j1)
    }
}

/// Symmetric second-difference Hessian of a scalar map; the output is
/// symmetrized.
pub fn fd_hessian<F>(f: F, x: &Vector, plan: &FdPlan) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<f64>,
{
    let d = x.len();
    let f0 = probe(f(x), x)?;
    let single = |h_scale: f64| -> Result<Matrix> {
        let mut hess = Matrix::zeros(d, d);
        for j in 0..d {
            let hj = plan.step(x[j]) * h_scale;
            let mut xp = x.clone();
            xp[j] += hj;
            let mut xm = x.clone();
            xm[j] -= hj;
            let fp = probe(f(&xp), &xp)?;
            let fm = probe(f(&xm), &xm)?;
            hess[(j, j)] = (fp - 2.0 * f0 + fm) / (hj * hj);
            for k in (j + 1)..d {
                let hk = plan.step(x[k]) * h_scale;
                let mut xpp = x.clone();
                xpp[j] += hj;
                xpp[k] += hk;
                let mut xpm = x.clone();
                xpm[j] += hj;
                xpm[k] -= hk;
                let mut xmp = x.clone();
                xmp[j] -= hj;
                xmp[k] += hk;
                let mut xmm = x.clone();
                xmm[j] -= hj;
                xmm[k] -= hk;
                let v = (probe(f(&xpp), &xpp)? - probe(f(&xpm), &xpm)? - probe(f(&xmp), &xmp)?
                    + probe(f(&xmm), &xmm)?)
                    / (4.0 * hj * hk);
                hess[(j, k)] = v;
                hess[(k, j)] = v;
            }
        }
        Ok(hess)
    };
    let h1 = single(1.0)?;
    let out = if plan.richardson {
        let h2 = single(0.5)?;
        (h2 * 4.0 - h1) / 3.0
    } else {
        h1
    };
    Ok((&out + out.transpose()) * 0.5)
}

/// The projection by its literal formula A_x (A_x^T A_x)^{-1} A_x^T.
pub fn brute_sigma(ax: &Matrix) -> Result<Matrix> {
    let gram = ax.transpose() * ax;
    let inv = gram.try_inverse().ok_or_else(|| Error::RankDeficient {
        context: "brute_sigma: Gram matrix is singular".to_string(),
    })?;
    Ok(ax * inv * ax.transpose())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Quadratic
/// convergence, no dependence on the main linear-algebra substrate.
pub fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.nrows();
    let mut a = ((m + m.transpose()) * 0.5).clone_owned();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

/// True iff every generalized eigenvalue of (P, Q) lies in [lo, hi], for
/// symmetric P and positive definite Q. Checked without a generalized
/// reduction: the window condition is equivalent to P - lo Q and hi Q - P
/// both being positive semidefinite.
pub fn psd_order_check(p: &Matrix, q: &Matrix, lo: f64, hi: f64) -> Result<bool> {
    if p.shape() != q.shape() || p.nrows() != p.ncols() {
        return Err(Error::DimensionMismatch {
            context: format!("psd_order_check: P {:?} vs Q {:?}", p.shape(), q.shape()),
        });
    }
    let q_eigs = jacobi_eigenvalues(q);
    let q_max = q_eigs.last().copied().unwrap_or(0.0);
    if q_eigs[0] <= 1e-12 * q_max.max(1.0) {
        return Err(Error::NotPositiveDefinite {
            context: format!("psd_order_check: Q has min eigenvalue {:e}", q_eigs[0]),
        });
    }
    let tol = 1e-10 * q_max.max(1.0) * (1.0 + lo.abs().max(hi.abs()));
    let lower = p - q * lo;
    let upper = q * hi - p;
    let ok_lower = jacobi_eigenvalues(&lower)[0] >= -tol;
    let ok_upper = jacobi_eigenvalues(&upper)[0] >= -tol;
    Ok(ok_lower && ok_upper)
}
