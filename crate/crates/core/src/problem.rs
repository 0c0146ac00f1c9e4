//! Problem instances: validation, planted synthesis, file round trips.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{extreme_singular_values, Matrix, SeededRng, Vector};

/// The quadruple (A, b, c, w) defining the regularized inversion objective
/// 0.5 ||g(x) - c||^2 + 0.5 ||diag(w) A x||^2.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub n: usize,
    pub d: usize,
    pub a: Matrix,
    pub b: Vector,
    pub c: Vector,
    pub w: Vector,
}

/// Parameters for the planted-optimum generator.
#[derive(Debug, Clone)]
pub struct PlantSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Target condition number of A, >= 1.
    pub kappa: f64,
    /// Lower bound on every |b_i|, > 0.
    pub b_floor: f64,
    /// Positive-definiteness margin l: the Hessian floor planted into w.
    pub pd_margin: f64,
    /// Rescale c so ||c||_2 <= 1. Off by default; bound diagnostics need it,
    /// planted-optimum runs must keep c = g(0) untouched.
    pub clamp_c: bool,
}

impl PlantSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            seed,
            kappa: 10.0,
            b_floor: 0.5 / (n.max(1) as f64).sqrt(),
            pd_margin: 0.1,
            clamp_c: false,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_b_floor(mut self, b_floor: f64) -> Self {
        self.b_floor = b_floor;
        self
    }

    pub fn with_pd_margin(mut self, l: f64) -> Self {
        self.pd_margin = l;
        self
    }

    pub fn with_clamped_c(mut self) -> Self {
        self.clamp_c = true;
        self
    }
}

/// Outcome of checking that no residual s_i = (Ax - b)_i vanishes.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// min_i |s_i| at the probed point.
    pub min_abs_residual: f64,
    /// Scale-aware tolerance the minimum is compared against.
    pub tol: f64,
    pub pass: bool,
    /// Row attaining the minimum (0-based).
    pub worst_row: usize,
}

/// Scale-aware residual tolerance: 1e-10 * (1 + ||b||_inf + ||A||_inf ||x||_inf).
pub fn residual_tol(inst: &ProblemInstance, x: &Vector) -> f64 {
    let b_inf = inst.b.amax();
    let a_inf = inst.a.amax();
    let x_inf = if x.is_empty() { 0.0 } else { x.amax() };
    1e-10 * (1.0 + b_inf + a_inf * x_inf)
}

/// Check that every entry of s_x = Ax - b stays away from zero.
pub fn validate_at(inst: &ProblemInstance, x: &Vector) -> Result<FeasibilityReport> {
    if x.len() != inst.d {
        return Err(Error::DimensionMismatch {
            context: format!("validate_at: x has length {}, d = {}", x.len(), inst.d),
        });
    }
    let s = &inst.a * x - &inst.b;
    let tol = residual_tol(inst, x);
    let mut min_abs = f64::INFINITY;
    let mut worst = 0;
    for (i, v) in s.iter().enumerate() {
        if v.abs() < min_abs {
            min_abs = v.abs();
            worst = i;
        }
    }
    Ok(FeasibilityReport {
        min_abs_residual: min_abs,
        tol,
        pass: min_abs > tol,
        worst_row: worst,
    })
}

fn orthonormal_columns(rng: &mut SeededRng, n: usize, d: usize) -> Result<Matrix> {
    let g = rng.gaussian_matrix(n, d);
    let (q, _) = crate::numkit::qr_thin(&g)?;
    Ok(q)
}

/// Generate an instance whose unique optimum sits at x* = 0.
///
/// A is built from seeded orthogonal factors with geometrically spaced
/// singular values between 1 and 1/kappa. b keeps every |b_i| >= b_floor so
/// s_0 = -b is safely nonzero. w is constant with
/// w_i^2 = 12000 beta^3 R + l / sigma_min(A)^2 measured at x = 0, which plants
/// the Hessian floor l. Finally c := g(0) makes the gradient vanish at 0.
pub fn gen_planted(spec: &PlantSpec) -> Result<(ProblemInstance, Vector)> {
    if spec.n < spec.d || spec.d == 0 {
        return Err(Error::GenerationFailed {
            context: format!("need n >= d >= 1, got n = {}, d = {}", spec.n, spec.d),
        });
    }
    if spec.kappa < 1.0 || !spec.kappa.is_finite() {
        return Err(Error::GenerationFailed {
            context: format!("kappa must be >= 1, got {}", spec.kappa),
        });
    }
    if spec.b_floor <= 0.0 || spec.b_floor >= 1.0 {
        return Err(Error::GenerationFailed {
            context: format!("b_floor must lie in (0, 1), got {}", spec.b_floor),
        });
    }
    if spec.pd_margin <= 0.0 {
        return Err(Error::GenerationFailed {
            context: format!("pd_margin must be > 0, got {}", spec.pd_margin),
        });
    }

    let mut rng = SeededRng::new(spec.seed);
    let n = spec.n;
    let d = spec.d;

    let singulars = Vector::from_fn(d, |j, _| {
        if d == 1 {
            1.0
        } else {
            spec.kappa.powf(-(j as f64) / (d as f64 - 1.0))
        }
    });

    // |b_i| is drawn from [b_floor, max(1/sqrt(n), b_floor)]; when the floor
    // sits under 1/sqrt(n) this keeps ||b||_2 <= 1.
    let hi = (1.0 / (n as f64).sqrt()).max(spec.b_floor);

    let mut last_err = String::new();
    for _attempt in 0..100 {
        let u = orthonormal_columns(&mut rng, n, d)?;
        let v = orthonormal_columns(&mut rng, d, d)?;
        let a = &u * Matrix::from_diagonal(&singulars) * v.transpose();

        let signs = rng.draw_uniform(n);
        let mags = rng.draw_uniform(n);
        let b = Vector::from_fn(n, |i, _| {
            let m = spec.b_floor + (hi - spec.b_floor) * mags[i];
            if signs[i] < 0.5 {
                -m
            } else {
                m
            }
        });
        if b.iter().any(|v| v.abs() < spec.b_floor) {
            last_err = "drawn b fell under b_floor".to_string();
            continue;
        }

        // Spectral data of A_0 = S_0^{-1} A at the plant point.
        let a0 = scale_rows(&a, &b.map(|v| -1.0 / v));
        let (rcap, beta) = extreme_singular_values(&a0);
        let (_, sigma_min_a) = extreme_singular_values(&a);
        if beta <= 0.0 || sigma_min_a <= 0.0 {
            last_err = "A_0 lost rank at the plant point".to_string();
            continue;
        }
        let w_val =
            (12000.0 * beta.powi(3) * rcap + spec.pd_margin / (sigma_min_a * sigma_min_a)).sqrt();
        let w = Vector::from_element(n, w_val);

        let mut inst = ProblemInstance {
            n,
            d,
            a,
            b,
            c: Vector::zeros(d),
            w,
        };
        let x0 = Vector::zeros(d);
        let state = crate::leverage::build_state(&inst, &x0)?;
        let mut c = crate::calculus::grad_lb(&state);
        if spec.clamp_c {
            let norm = c.norm();
            if norm > 1.0 {
                c /= norm;
            }
        }
        inst.c = c;
        validate_instance(&inst).map_err(|e| Error::GenerationFailed {
            context: format!("generated instance failed validation: {e}"),
        })?;
        return Ok((inst, x0));
    }
    Err(Error::GenerationFailed {
        context: format!("100 resamples exhausted: {last_err}"),
    })
}

/// Random point at which every residual entry stays bounded away from zero:
/// the radius is `scale * min_i |b_i| / (2 ||A||)`, so s(x) stays within half
/// of min |b_i| of s(0) = -b for scale <= 1.
pub fn feasible_point(inst: &ProblemInstance, scale: f64, rng: &mut SeededRng) -> Vector {
    let min_b = inst.b.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let radius = scale * min_b / (2.0 * extreme_singular_values(&inst.a).0);
    rng.sphere_point(inst.d, radius)
}

/// Multiply row i of `m` by `scale[i]`.
pub fn scale_rows(m: &Matrix, scale: &Vector) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] *= scale[i];
        }
    }
    out
}

fn validate_instance(inst: &ProblemInstance) -> Result<()> {
    let check = |name: &str, ok: bool, why: String| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::ParseError {
                field: name.to_string(),
                context: why,
            })
        }
    };
    check(
        "n/d",
        inst.n >= inst.d && inst.d >= 1,
        format!("need n >= d >= 1, got n = {}, d = {}", inst.n, inst.d),
    )?;
    check(
        "A",
        inst.a.shape() == (inst.n, inst.d),
        format!(
            "A is {:?}, expected ({}, {})",
            inst.a.shape(),
            inst.n,
            inst.d
        ),
    )?;
    check(
        "b",
        inst.b.len() == inst.n,
        format!("b has length {}", inst.b.len()),
    )?;
    check(
        "c",
        inst.c.len() == inst.d,
        format!("c has length {}", inst.c.len()),
    )?;
    check(
        "w",
        inst.w.len() == inst.n,
        format!("w has length {}", inst.w.len()),
    )?;
    check(
        "finite",
        inst.a.iter().all(|v| v.is_finite())
            && inst.b.iter().all(|v| v.is_finite())
            && inst.c.iter().all(|v| v.is_finite())
            && inst.w.iter().all(|v| v.is_finite()),
        "non-finite entry".to_string(),
    )?;
    check(
        "w",
        inst.w.iter().all(|v| *v > 0.0),
        "w must be entrywise positive".to_string(),
    )?;
    let (hi, lo) = extreme_singular_values(&inst.a);
    check(
        "A",
        lo > crate::numkit::RANK_TOL * hi && hi > 0.0,
        format!("A is rank deficient: sigma_min = {lo:e}, sigma_max = {hi:e}"),
    )?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format_version: u32,
    n: usize,
    d: usize,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
}

/// Serialize an instance to its JSON text form (row-major A, format_version 1).
pub fn instance_to_string(inst: &ProblemInstance) -> Result<String> {
    validate_instance(inst)?;
    let mut a = Vec::with_capacity(inst.n * inst.d);
    for i in 0..inst.n {
        for j in 0..inst.d {
            a.push(inst.a[(i, j)]);
        }
    }
    let file = InstanceFile {
        format_version: 1,
        n: inst.n,
        d: inst.d,
        a,
        b: inst.b.iter().copied().collect(),
        c: inst.c.iter().copied().collect(),
        w: inst.w.iter().copied().collect(),
    };
    serde_json::to_string(&file).map_err(|e| Error::ParseError {
        field: "instance".to_string(),
        context: e.to_string(),
    })
}

/// Parse an instance from its JSON text form.
pub fn instance_from_str(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::ParseError {
        field: "instance".to_string(),
        context: e.to_string(),
    })?;
    if file.format_version != 1 {
        return Err(Error::ParseError {
            field: "format_version".to_string(),
            context: format!("unsupported version {}", file.format_version),
        });
    }
    if file.a.len() != file.n * file.d {
        return Err(Error::ParseError {
            field: "A".to_string(),
            context: format!(
                "expected {} entries, found {}",
                file.n * file.d,
                file.a.len()
            ),
        });
    }
    if file.b.len() != file.n || file.w.len() != file.n || file.c.len() != file.d {
        return Err(Error::ParseError {
            field: "b/c/w".to_string(),
            context: "array length does not match n/d".to_string(),
        });
    }
    let a = Matrix::from_row_slice(file.n, file.d, &file.a);
    let inst = ProblemInstance {
        n: file.n,
        d: file.d,
        a,
        b: Vector::from_vec(file.b),
        c: Vector::from_vec(file.c),
        w: Vector::from_vec(file.w),
    };
    validate_instance(&inst)?;
    Ok(inst)
}

pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    let text = instance_to_string(inst)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path)?;
    instance_from_str(&text)
}
