//! Charged point normalization.
//!
//! A trailing copy `Ŵ` of the parameters acts as a repelling charge. The
//! penalty
//!
//! ```text
//! R_t = exp(-β t) / Σ_i ‖W_i − Ŵ_i‖_p
//! ```
//!
//! is added to the loss with weight `λ`, and after each optimizer step the
//! trailing copy is merged towards the pre-step parameters with an
//! exponential moving average `Ŵ ← αŴ + (1 − α)W`. The exponential factor
//! makes the penalty vanish as `t` grows, so late in training the base
//! optimizer is left alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::Optimizer;
use crate::params::{gaussian_noise_like, pnorm, ParamSet};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpnConfig {
    /// Per-iteration decay rate of the penalty.
    pub beta: f64,
    /// Weight of the penalty in the loss.
    pub lambda: f64,
    /// Norm order of the distance term.
    pub p: f64,
    /// EMA coefficient of the merge update, in (0, 1).
    pub alpha: f64,
    /// Standard deviation of the noise separating the initial trailing copy
    /// from the parameters.
    pub eps_sigma: f64,
    /// Lower bound on the summed distance.
    pub denom_floor: f64,
}

impl Default for CpnConfig {
    fn default() -> Self {
        Self {
            beta: 0.001,
            lambda: 0.1,
            p: 1.0,
            alpha: 0.95,
            eps_sigma: 1e-4,
            denom_floor: 1e-12,
        }
    }
}

impl CpnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("CPN {what}, got {v}")));
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta must be non-negative", self.beta);
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be non-negative", self.lambda);
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return bad("p must be >= 1", self.p);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)", self.alpha);
        }
        if !(self.eps_sigma > 0.0) || !self.eps_sigma.is_finite() {
            return bad("eps_sigma must be positive", self.eps_sigma);
        }
        if !(self.denom_floor > 0.0) || !self.denom_floor.is_finite() {
            return bad("denom_floor must be positive", self.denom_floor);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpnState {
    trailing: ParamSet,
    t: u64,
    config: CpnConfig,
}

impl CpnState {
    /// `Ŵ¹ = W¹ + ε` with `ε ~ N(0, eps_sigma²)`, `t = 1`.
    pub fn init(params: &ParamSet, config: CpnConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let noise = gaussian_noise_like(params, config.eps_sigma, rng)?;
        let trailing = params.zip_map(&noise, |w, e| w + e)?;
        Ok(Self {
            trailing,
            t: 1,
            config,
        })
    }

    /// State with an explicit trailing copy and counter.
    pub fn from_parts(trailing: ParamSet, t: u64, config: CpnConfig) -> Result<Self> {
        config.validate()?;
        if t < 1 {
            return Err(Error::InvalidParameter("CPN counter starts at 1".into()));
        }
        Ok(Self {
            trailing,
            t,
            config,
        })
    }

    pub fn trailing(&self) -> &ParamSet {
        &self.trailing
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &CpnConfig {
        &self.config
    }

    /// `exp(-β t)`.
    pub fn decay_factor(&self) -> f64 {
        (-self.config.beta * self.t as f64).exp()
    }

    /// Per-group `‖W_i − Ŵ_i‖_p`.
    pub fn group_distances(&self, params: &ParamSet) -> Result<Vec<f64>> {
        params.check_conformable(&self.trailing)?;
        params
            .groups()
            .iter()
            .zip(self.trailing.groups())
            .map(|(w, tr)| {
                let diff: Vec<f64> = w
                    .values()
                    .iter()
                    .zip(tr.values())
                    .map(|(a, b)| a - b)
                    .collect();
                pnorm(&diff, self.config.p)
            })
            .collect()
    }

    /// Sum of the per-group distances, before flooring.
    pub fn distance(&self, params: &ParamSet) -> Result<f64> {
        Ok(self.group_distances(params)?.iter().sum())
    }

    /// `R_t = exp(-βt) / max(D, floor)`.
    pub fn penalty(&self, params: &ParamSet) -> Result<f64> {
        let d = self.distance(params)?;
        Ok(self.decay_factor() / d.max(self.config.denom_floor))
    }

    /// `∂R_t/∂W`, with the trailing copy held constant. For entry `k` of group
    /// `i`:
    ///
    /// ```text
    /// −exp(-βt) · sign(d_k)|d_k|^(p−1) / (‖d_i‖_p^(p−1) · D²),   d = W − Ŵ
    /// ```
    ///
    /// `sign(0) = 0`. At or below the floor the penalty is flat and the
    /// gradient is zero.
    pub fn penalty_grad(&self, params: &ParamSet) -> Result<ParamSet> {
        let norms = self.group_distances(params)?;
        let d: f64 = norms.iter().sum();
        let mut grad = params.zeros_like();
        if d <= self.config.denom_floor {
            return Ok(grad);
        }
        let p = self.config.p;
        let scale = -self.decay_factor() / (d * d);
        let groups = grad
            .groups_mut()
            .iter_mut()
            .zip(params.groups())
            .zip(self.trailing.groups())
            .zip(&norms);
        for (((out, w), tr), &norm) in groups {
            if norm == 0.0 {
                continue;
            }
            let values = out.values_mut().iter_mut().zip(w.values()).zip(tr.values());
            for ((o, &wk), &tk) in values {
                let diff = wk - tk;
                let dnorm = if p == 1.0 {
                    sign(diff)
                } else {
                    sign(diff) * (diff.abs() / norm).powf(p - 1.0)
                };
                *o = scale * dnorm;
            }
        }
        Ok(grad)
    }

    /// `base_grad + λ ∂R_t/∂W`. With `λ = 0` the base gradient is returned
    /// untouched.
    pub fn total_grad(&self, params: &ParamSet, base_grad: &ParamSet) -> Result<ParamSet> {
        params.check_conformable(base_grad)?;
        if self.config.lambda == 0.0 {
            params.check_conformable(&self.trailing)?;
            return Ok(base_grad.clone());
        }
        let pg = self.penalty_grad(params)?;
        let lambda = self.config.lambda;
        base_grad.zip_map(&pg, |b, r| b + lambda * r)
    }

    /// `Ŵ ← αŴ + (1 − α)W`, `t ← t + 1`. `params` are the values the
    /// penalty was evaluated at, i.e. before the optimizer step.
    pub fn merge_update(&mut self, params: &ParamSet) -> Result<()> {
        params.check_conformable(&self.trailing)?;
        let alpha = self.config.alpha;
        self.trailing = self
            .trailing
            .zip_map(params, |tr, w| alpha * tr + (1.0 - alpha) * w)?;
        self.t += 1;
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One training step: total gradient, optimizer update, then merge of the
/// trailing copy with the pre-step parameters. Without a CPN state this is
/// the bare optimizer step. Returns the gradient that was applied.
pub fn charged_step(
    optimizer: &mut dyn Optimizer,
    cpn: Option<&mut CpnState>,
    params: &mut ParamSet,
    base_grad: &ParamSet,
) -> Result<ParamSet> {
    match cpn {
        None => {
            optimizer.step(params, base_grad)?;
            Ok(base_grad.clone())
        }
        Some(state) => {
            let total = state.total_grad(params, base_grad)?;
            let before = params.clone();
            optimizer.step(params, &total)?;
            state.merge_update(&before)?;
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamGroup;
    use crate::rng::Stream;

    fn cfg(beta: f64, lambda: f64, p: f64) -> CpnConfig {
        CpnConfig {
            beta,
            lambda,
            p,
            ..CpnConfig::default()
        }
    }

    fn single(v: &[f64]) -> ParamSet {
        ParamSet::from_point("w", v)
    }

    #[test]
    fn init_adds_noise_and_starts_at_one() {
        let params = single(&[0.0; 32]);
        let mut rng = SeededRng::new(5, Stream::EpsNoise);
        let state = CpnState::init(&params, CpnConfig::default(), &mut rng).unwrap();
        assert_eq!(state.t(), 1);
        assert!(state.trailing().flatten().iter().any(|&v| v != 0.0));
        assert!(state.distance(&params).unwrap() > 0.0);

        let again = CpnState::init(
            &params,
            CpnConfig::default(),
            &mut SeededRng::new(5, Stream::EpsNoise),
        )
        .unwrap();
        assert_eq!(again, state);
    }

    #[test]
    fn init_rejects_bad_config() {
        let params = single(&[0.0]);
        let mut rng = SeededRng::new(5, Stream::EpsNoise);
        for bad in [
            CpnConfig {
                alpha: 1.0,
                ..CpnConfig::default()
            },
            CpnConfig {
                alpha: 0.0,
                ..CpnConfig::default()
            },
            CpnConfig {
                p: 0.5,
                ..CpnConfig::default()
            },
            CpnConfig {
                beta: -1.0,
                ..CpnConfig::default()
            },
            CpnConfig {
                lambda: -0.1,
                ..CpnConfig::default()
            },
            CpnConfig {
                eps_sigma: 0.0,
                ..CpnConfig::default()
            },
        ] {
            assert!(CpnState::init(&params, bad, &mut rng).is_err());
        }
    }

    #[test]
    fn penalty_examples() {
        let state = CpnState::from_parts(single(&[0.0, 0.0, 0.0]), 1, cfg(0.0, 1.0, 1.0)).unwrap();
        let r = state.penalty(&single(&[1.0, -2.0, 3.0])).unwrap();
        assert!((r - 1.0 / 6.0).abs() < 1e-15);

        let state =
            CpnState::from_parts(single(&[0.0]), 1, cfg(std::f64::consts::LN_2, 1.0, 1.0)).unwrap();
        assert!((state.penalty(&single(&[1.0])).unwrap() - 0.5).abs() < 1e-15);

        let two = |a: Vec<f64>, b: Vec<f64>| {
            ParamSet::new(vec![
                ParamGroup::vector("a", a).unwrap(),
                ParamGroup::vector("b", b).unwrap(),
            ])
            .unwrap()
        };
        let state =
            CpnState::from_parts(two(vec![0.0, 0.0], vec![0.0]), 1, cfg(0.0, 1.0, 1.0)).unwrap();
        let r = state.penalty(&two(vec![2.0, -3.0], vec![5.0])).unwrap();
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn penalty_is_floored() {
        let c = cfg(0.0, 1.0, 1.0);
        let state = CpnState::from_parts(single(&[1.0]), 1, c).unwrap();
        assert_eq!(state.penalty(&single(&[1.0])).unwrap(), 1.0 / c.denom_floor);
    }

    #[test]
    fn gradient_examples() {
        let state = CpnState::from_parts(single(&[0.0]), 1, cfg(0.0, 1.0, 1.0)).unwrap();
        let g = state.penalty_grad(&single(&[2.0])).unwrap();
        assert!((g.flatten()[0] + 0.25).abs() < 1e-15);

        let same = single(&[0.3, -0.7]);
        for p in [1.0, 2.0, 3.0] {
            let state = CpnState::from_parts(same.clone(), 3, cfg(0.5, 1.0, p)).unwrap();
            assert!(state
                .penalty_grad(&same)
                .unwrap()
                .flatten()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sign_zero_components_get_no_gradient() {
        let state = CpnState::from_parts(single(&[0.0, 1.0]), 1, cfg(0.0, 1.0, 1.0)).unwrap();
        let g = state.penalty_grad(&single(&[2.0, 1.0])).unwrap().flatten();
        assert_eq!(g[1], 0.0);
        assert!((g[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn total_grad_examples() {
        let base = single(&[1.0]);
        let state = CpnState::from_parts(single(&[0.0]), 1, cfg(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(state.total_grad(&single(&[2.0]), &base).unwrap(), base);

        let state = CpnState::from_parts(single(&[0.0]), 1, cfg(0.0, 1.0, 1.0)).unwrap();
        let pure = state.penalty_grad(&single(&[2.0])).unwrap();
        assert_eq!(
            state.total_grad(&single(&[2.0]), &single(&[0.0])).unwrap(),
            pure
        );

        // Penalty gradient −0.5 at W−Ŵ = [√2]: −1/2 for p = 1, β = 0.
        let state = CpnState::from_parts(single(&[0.0]), 1, cfg(0.0, 0.1, 1.0)).unwrap();
        let at = single(&[std::f64::consts::SQRT_2]);
        assert!((state.penalty_grad(&at).unwrap().flatten()[0] + 0.5).abs() < 1e-15);
        let total = state.total_grad(&at, &base).unwrap().flatten()[0];
        assert!((total - 0.95).abs() < 1e-15);

        assert!(state
            .total_grad(&single(&[1.0, 2.0]), &single(&[1.0]))
            .is_err());
    }

    #[test]
    fn merge_examples() {
        let c = CpnConfig {
            alpha: 0.95,
            ..CpnConfig::default()
        };
        let mut state = CpnState::from_parts(single(&[0.0]), 1, c).unwrap();
        state.merge_update(&single(&[1.0])).unwrap();
        assert!((state.trailing().flatten()[0] - 0.05).abs() < 1e-15);
        assert_eq!(state.t(), 2);

        // Constant parameters: the gap shrinks by exactly α per update.
        let mut state = CpnState::from_parts(single(&[0.0]), 1, c).unwrap();
        let target = single(&[2.0]);
        let mut gap = 2.0;
        for _ in 0..200 {
            state.merge_update(&target).unwrap();
            let new_gap = 2.0 - state.trailing().flatten()[0];
            assert!((new_gap - 0.95 * gap).abs() < 1e-12);
            gap = new_gap;
        }
        assert!(gap < 1e-4);

        let c = CpnConfig {
            alpha: 1.0 - 1e-12,
            ..CpnConfig::default()
        };
        let mut state = CpnState::from_parts(single(&[0.25]), 1, c).unwrap();
        state.merge_update(&single(&[100.0])).unwrap();
        assert!((state.trailing().flatten()[0] - 0.25).abs() < 1e-9);
        assert!(state.merge_update(&single(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn decay_ratio_is_exp_minus_beta() {
        let c = cfg(0.001, 1.0, 1.0);
        let params = single(&[1.0, 2.0]);
        let mut state = CpnState::from_parts(single(&[0.0, 0.0]), 1, c).unwrap();
        let r1 = state.penalty(&params).unwrap();
        let expected = (-0.001f64).exp();
        for _ in 0..50 {
            let before = state.penalty(&params).unwrap();
            // Hold the trailing copy fixed by merging with itself.
            let trailing = state.trailing().clone();
            state.merge_update(&trailing).unwrap();
            let after = state.penalty(&params).unwrap();
            assert!((after / before - expected).abs() < 1e-15);
        }
        let at_1e4 = CpnState::from_parts(single(&[0.0, 0.0]), 10_001, c).unwrap();
        let ratio = at_1e4.penalty(&params).unwrap() / r1;
        assert!((ratio / (-10.0f64).exp() - 1.0).abs() < 1e-12);
    }
}
