//! Hessian estimation, symmetric eigenvalues and critical-point classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default near-zero tolerance for classification.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-6;
/// Default central-difference step for [`fd_hessian`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalPoint {
    LocalMin,
    LocalMax,
    Saddle,
    Degenerate,
}

impl CriticalPoint {
    pub fn as_str(self) -> &'static str {
        match self {
            CriticalPoint::LocalMin => "LocalMin",
            CriticalPoint::LocalMax => "LocalMax",
            CriticalPoint::Saddle => "Saddle",
            CriticalPoint::Degenerate => "Degenerate",
        }
    }
}

/// Central-difference Hessian of a gradient oracle, symmetrised.
///
/// Column `k` is `(∇f(x + h e_k) − ∇f(x − h e_k)) / 2h`; the result is
/// `(H + Hᵀ) / 2`.
pub fn fd_hessian<F>(mut grad_fn: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut probe = x.to_vec();
    for k in 0..n {
        probe[k] = x[k] + h;
        let plus = grad_fn(&probe);
        probe[k] = x[k] - h;
        let minus = grad_fn(&probe);
        probe[k] = x[k];
        if plus.len() != n || minus.len() != n {
            return Err(Error::StructuralMismatch(format!(
                "gradient oracle returned {} / {} entries for a {n}-dimensional point",
                plus.len(),
                minus.len()
            )));
        }
        for j in 0..n {
            let (gp, gm) = (plus[j], minus[j]);
            if !gp.is_finite() || !gm.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite gradient while probing coordinate {k}"
                )));
            }
            hess[(j, k)] = (gp - gm) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (hess[(i, j)] + hess[(j, i)]);
            hess[(i, j)] = avg;
            hess[(j, i)] = avg;
        }
    }
    Ok(hess)
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations.
pub fn sym_eigenvalues(h: &Matrix) -> Result<Vec<f64>> {
    if !h.is_square() {
        return Err(Error::StructuralMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    if n == 0 {
        return Err(Error::EmptyInput("0x0 matrix".into()));
    }
    if h.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "matrix has non-finite entries".into(),
        ));
    }
    let scale = h.max_abs();
    let asym = h.asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }

    let mut a = h.clone();
    // Start from an exactly symmetric copy.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let frob = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = JACOBI_OFF_TOL * frob.max(1.0);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::NumericalFailure(
            "Jacobi iteration did not converge".into(),
        ));
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        // |apq| negligible against the diagonal gap.
        0.5 / theta
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
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
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
}

/// Classifies a critical point from its Hessian eigenvalues.
pub fn classify_critical(eigs: &[f64], tol: f64) -> Result<CriticalPoint> {
    if eigs.is_empty() {
        return Err(Error::EmptyInput("no eigenvalues to classify".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let any_pos = eigs.iter().any(|&l| l > tol);
    let any_neg = eigs.iter().any(|&l| l < -tol);
    Ok(if any_pos && any_neg {
        CriticalPoint::Saddle
    } else if eigs.iter().all(|&l| l > tol) {
        CriticalPoint::LocalMin
    } else if eigs.iter().all(|&l| l < -tol) {
        CriticalPoint::LocalMax
    } else {
        CriticalPoint::Degenerate
    })
}

/// Fraction of the `2^n` sign orthants of eigenvalue space that are definite
/// (all-positive or all-negative): `2^(1-n)`.
pub fn definite_orthant_fraction(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    Ok(2f64.powi(1 - n as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub tol: f64,
    pub n_negative: usize,
    pub n_near_zero: usize,
    pub n_positive: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub classification: CriticalPoint,
}

impl SpectrumReport {
    pub fn spread(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }
}

pub fn spectrum_report(eigs: &[f64], tol: f64) -> Result<SpectrumReport> {
    let classification = classify_critical(eigs, tol)?;
    let mut sorted = eigs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n_near_zero = sorted.iter().filter(|l| l.abs() <= tol).count();
    let n_negative = sorted.iter().filter(|&&l| l < -tol).count();
    let n_positive = sorted.len() - n_near_zero - n_negative;
    Ok(SpectrumReport {
        lambda_min: sorted[0],
        lambda_max: sorted[sorted.len() - 1],
        eigenvalues: sorted,
        tol,
        n_negative,
        n_near_zero,
        n_positive,
        classification,
    })
}
