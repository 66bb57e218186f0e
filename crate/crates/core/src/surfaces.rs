//! Analytic objectives with exact value, gradient and Hessian.

use serde::{Deserialize, Serialize};

use crate::analysis::sym_eigenvalues;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::ParamSet;

/// Group name used when a surface point is viewed as a [`ParamSet`].
pub const POINT_GROUP: &str = "x";

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Surface {
    /// `x³ − 3xy²`: a degenerate saddle at the origin with plateaus all round.
    MonkeySaddle,
    /// `½ xᵀHx` for symmetric `H`.
    QuadraticForm(Matrix),
}

impl Surface {
    pub fn quadratic(h: Matrix) -> Result<Self> {
        match h.asymmetry() {
            None => Err(Error::StructuralMismatch(format!(
                "quadratic form needs a square matrix, got {}x{}",
                h.rows(),
                h.cols()
            ))),
            Some(a) if a > SYMMETRY_TOL => Err(Error::InvalidParameter(format!(
                "quadratic form matrix is not symmetric (max asymmetry {a:e})"
            ))),
            Some(_) => Ok(Surface::QuadraticForm(h)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Surface::MonkeySaddle => 2,
            Surface::QuadraticForm(h) => h.rows(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::StructuralMismatch(format!(
                "surface is {}-dimensional, point has {} coordinates",
                self.dim(),
                x.len()
            )))
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Surface::MonkeySaddle => {
                let (a, b) = (x[0], x[1]);
                a * a * a - 3.0 * a * b * b
            }
            Surface::QuadraticForm(h) => {
                let hx = h.matvec(x)?;
                0.5 * x.iter().zip(&hx).map(|(a, b)| a * b).sum::<f64>()
            }
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self {
            Surface::MonkeySaddle => {
                let (a, b) = (x[0], x[1]);
                Ok(vec![3.0 * a * a - 3.0 * b * b, -6.0 * a * b])
            }
            Surface::QuadraticForm(h) => h.matvec(x),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Matrix> {
        self.check_dim(x)?;
        Ok(match self {
            Surface::MonkeySaddle => {
                let (a, b) = (x[0], x[1]);
                Matrix::from_vec(2, 2, vec![6.0 * a, -6.0 * b, -6.0 * b, -6.0 * a])?
            }
            Surface::QuadraticForm(h) => h.clone(),
        })
    }

    /// Gradient of the point stored in the single group of `params`.
    pub fn grad_params(&self, params: &ParamSet) -> Result<ParamSet> {
        let x = point_of(params)?;
        let g = self.grad(x)?;
        Ok(ParamSet::from_point(POINT_GROUP, &g))
    }

    pub fn eval_params(&self, params: &ParamSet) -> Result<f64> {
        self.eval(point_of(params)?)
    }
}

/// The coordinates of a surface point stored as a single-group [`ParamSet`].
pub fn point_of(params: &ParamSet) -> Result<&[f64]> {
    match params.groups() {
        [g] if g.name() == POINT_GROUP => Ok(g.values()),
        _ => Err(Error::StructuralMismatch(format!(
            "surface points are a single group named `{POINT_GROUP}`"
        ))),
    }
}

/// `1 / λ_max(H)`: the step size above which gradient descent is said to
/// start diverging. The classical bound for quadratics is `2 / λ_max`; both
/// are exposed so callers can pick.
pub fn stability_threshold(h: &Matrix) -> Result<f64> {
    let eigs = sym_eigenvalues(h)?;
    let lambda_max = *eigs.last().expect("non-empty spectrum");
    if lambda_max > 0.0 {
        Ok(1.0 / lambda_max)
    } else {
        Err(Error::UndefinedThreshold)
    }
}

/// `2 / λ_max(H)`, the exact divergence threshold of gradient descent on a
/// quadratic.
pub fn quadratic_divergence_threshold(h: &Matrix) -> Result<f64> {
    stability_threshold(h).map(|t| 2.0 * t)
}
