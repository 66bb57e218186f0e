//! Named groups of flat parameter vectors.
//!
//! A [`ParamSet`] is the common currency between objectives, the charged point
//! penalty and the optimizers. Groups are stored flat with an attached shape;
//! matrix interpretation is left to the consumer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    name: String,
    values: Vec<f64>,
    shape: Vec<usize>,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>, values: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if shape.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "group `{name}` has a zero dimension in shape {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::StructuralMismatch(format!(
                "group `{name}`: shape {shape:?} holds {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            name,
            values,
            shape,
        })
    }

    /// One-dimensional group.
    pub fn vector(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(name, values, vec![n])
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(name, vec![0.0; n], shape)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn conformable(&self, other: &ParamGroup) -> bool {
        self.name == other.name && self.shape == other.shape
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            name: self.name.clone(),
            values,
            shape: self.shape.clone(),
        }
    }
}

/// `(Σ_k |x_k|^p)^(1/p)` over one group.
pub fn group_pnorm(x: &ParamGroup, p: f64) -> Result<f64> {
    pnorm(x.values(), p)
}

pub(crate) fn pnorm(values: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "norm order must be a finite value >= 1, got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(values.iter().map(|v| v.abs()).sum());
    }
    if p == 2.0 {
        return Ok(values.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    // Scale by the largest magnitude so |x|^p neither overflows nor underflows.
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    Ok(scale * sum.powf(1.0 / p))
}

/// Ordered collection of uniquely named groups.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    groups: Vec<ParamGroup>,
}

impl ParamSet {
    pub fn new(groups: Vec<ParamGroup>) -> Result<Self> {
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate group name `{}`",
                    g.name
                )));
            }
        }
        Ok(Self { groups })
    }

    /// Single group holding a point, the view used for analytic surfaces.
    pub fn from_point(name: &str, point: &[f64]) -> Self {
        Self {
            groups: vec![ParamGroup {
                name: name.to_string(),
                values: point.to_vec(),
                shape: vec![point.len()],
            }],
        }
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    pub fn get(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamGroup> {
        self.groups.iter_mut().find(|g| g.name == name)
    }

    /// Total number of scalars across all groups.
    pub fn len(&self) -> usize {
        self.groups.iter().map(ParamGroup::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| 0.0)
    }

    /// Same names, order and shapes.
    pub fn conformable(&self, other: &ParamSet) -> bool {
        self.groups.len() == other.groups.len()
            && self
                .groups
                .iter()
                .zip(&other.groups)
                .all(|(a, b)| a.conformable(b))
    }

    pub fn check_conformable(&self, other: &ParamSet) -> Result<()> {
        if self.conformable(other) {
            Ok(())
        } else {
            Err(Error::StructuralMismatch(format!(
                "parameter sets differ: [{}] vs [{}]",
                self.describe(),
                other.describe()
            )))
        }
    }

    fn describe(&self) -> String {
        self.groups
            .iter()
            .map(|g| format!("{}{:?}", g.name, g.shape))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Applies `f` to every scalar.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .map(|g| g.with_values(g.values.iter().map(|&v| f(v)).collect()))
                .collect(),
        }
    }

    /// Elementwise combination of two conformable sets.
    pub fn zip_map(&self, other: &ParamSet, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        self.check_conformable(other)?;
        Ok(Self {
            groups: self
                .groups
                .iter()
                .zip(&other.groups)
                .map(|(a, b)| {
                    a.with_values(
                        a.values
                            .iter()
                            .zip(&b.values)
                            .map(|(&x, &y)| f(x, y))
                            .collect(),
                    )
                })
                .collect(),
        })
    }

    /// Flattened copy of every scalar in group order.
    pub fn flatten(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| g.values.iter().copied())
            .collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.values.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.values.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.values.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Returns `a·x + y`.
pub fn axpy(a: f64, x: &ParamSet, y: &ParamSet) -> Result<ParamSet> {
    x.zip_map(y, |xv, yv| a * xv + yv)
}

/// A set conformable with `x` holding i.i.d. `N(0, sigma²)` draws.
pub fn gaussian_noise_like(x: &ParamSet, sigma: f64, rng: &mut SeededRng) -> Result<ParamSet> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise standard deviation must be positive, got {sigma}"
        )));
    }
    Ok(x.map(|_| sigma * rng.normal()))
}
