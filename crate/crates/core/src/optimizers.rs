//! First-order update rules: SGD (with momentum / Nesterov and inverse-time
//! decay), AdaGrad, AdaDelta and Adam.
//!
//! Each optimizer owns its accumulator state, built conformable with the
//! parameters it will update, and mutates the parameters in place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;

pub trait Optimizer: Send {
    /// Applies one update to `params` given the gradient at `params`.
    fn step(&mut self, params: &mut ParamSet, grad: &ParamSet) -> Result<()>;

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    SgdAccelerated,
    #[serde(rename = "adagrad")]
    AdaGrad,
    #[serde(rename = "adadelta")]
    AdaDelta,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Sgd,
        OptimizerKind::SgdAccelerated,
        OptimizerKind::AdaGrad,
        OptimizerKind::AdaDelta,
        OptimizerKind::Adam,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::SgdAccelerated => "sgd_accelerated",
            OptimizerKind::AdaGrad => "adagrad",
            OptimizerKind::AdaDelta => "adadelta",
            OptimizerKind::Adam => "adam",
        }
    }

    /// Display label used in the comparison table.
    pub fn label(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "SGD",
            OptimizerKind::SgdAccelerated => "SGD Accelerated",
            OptimizerKind::AdaGrad => "AdaGrad",
            OptimizerKind::AdaDelta => "AdaDelta",
            OptimizerKind::Adam => "Adam",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "sgd_accelerated" | "sgd_nesterov" | "nesterov" => Ok(OptimizerKind::SgdAccelerated),
            "adagrad" => Ok(OptimizerKind::AdaGrad),
            "adadelta" => Ok(OptimizerKind::AdaDelta),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::InvalidParameter(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub nesterov: bool,
    /// Inverse-time decay: the step uses `lr / (1 + decay·iter)`.
    pub decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.0,
            nesterov: false,
            decay: 0.0,
        }
    }
}

impl SgdConfig {
    pub fn accelerated() -> Self {
        Self {
            momentum: 0.9,
            nesterov: true,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        check_positive("lr", self.lr)?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.decay >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay must be non-negative, got {}",
                self.decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaGradConfig {
    pub lr: f64,
    /// Added to the squared-gradient sum under the square root.
    pub eps: f64,
}

impl Default for AdaGradConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            eps: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaDeltaConfig {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for AdaDeltaConfig {
    fn default() -> Self {
        Self {
            lr: 1.0,
            rho: 0.95,
            eps: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Serializable optimizer choice plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd(SgdConfig),
    SgdAccelerated(SgdConfig),
    #[serde(rename = "adagrad")]
    AdaGrad(AdaGradConfig),
    #[serde(rename = "adadelta")]
    AdaDelta(AdaDeltaConfig),
    Adam(AdamConfig),
}

impl OptimizerConfig {
    /// Toy-problem hyperparameters: SGD and SGD Accelerated at lr 0.01
    /// (momentum 0 / 0.9 with Nesterov), AdaGrad lr 0.01, AdaDelta lr 1.0
    /// with ρ 0.95, Adam lr 0.01 with β₁ 0.9, β₂ 0.999.
    pub fn toy_defaults(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerConfig::Sgd(SgdConfig::default()),
            OptimizerKind::SgdAccelerated => {
                OptimizerConfig::SgdAccelerated(SgdConfig::accelerated())
            }
            OptimizerKind::AdaGrad => OptimizerConfig::AdaGrad(AdaGradConfig::default()),
            OptimizerKind::AdaDelta => OptimizerConfig::AdaDelta(AdaDeltaConfig::default()),
            OptimizerKind::Adam => OptimizerConfig::Adam(AdamConfig::default()),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerConfig::Sgd(_) => OptimizerKind::Sgd,
            OptimizerConfig::SgdAccelerated(_) => OptimizerKind::SgdAccelerated,
            OptimizerConfig::AdaGrad(_) => OptimizerKind::AdaGrad,
            OptimizerConfig::AdaDelta(_) => OptimizerKind::AdaDelta,
            OptimizerConfig::Adam(_) => OptimizerKind::Adam,
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd(c) | OptimizerConfig::SgdAccelerated(c) => c.lr,
            OptimizerConfig::AdaGrad(c) => c.lr,
            OptimizerConfig::AdaDelta(c) => c.lr,
            OptimizerConfig::Adam(c) => c.lr,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        match &mut self {
            OptimizerConfig::Sgd(c) | OptimizerConfig::SgdAccelerated(c) => c.lr = lr,
            OptimizerConfig::AdaGrad(c) => c.lr = lr,
            OptimizerConfig::AdaDelta(c) => c.lr = lr,
            OptimizerConfig::Adam(c) => c.lr = lr,
        }
        self
    }

    /// Builds fresh optimizer state conformable with `params`.
    pub fn build(&self, params: &ParamSet) -> Result<Box<dyn Optimizer>> {
        Ok(match *self {
            OptimizerConfig::Sgd(c) | OptimizerConfig::SgdAccelerated(c) => {
                Box::new(Sgd::new(c, params)?)
            }
            OptimizerConfig::AdaGrad(c) => Box::new(AdaGrad::new(c, params)?),
            OptimizerConfig::AdaDelta(c) => Box::new(AdaDelta::new(c, params)?),
            OptimizerConfig::Adam(c) => Box::new(Adam::new(c, params)?),
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

fn check_eps(v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "eps must be non-negative, got {v}"
        )))
    }
}

fn check_shapes(params: &ParamSet, grad: &ParamSet, state: &ParamSet) -> Result<()> {
    params.check_conformable(grad)?;
    params.check_conformable(state)
}

/// Runs `f(param, grad, state_a, state_b)` over every scalar.
fn update_each(
    params: &mut ParamSet,
    grad: &ParamSet,
    a: &mut ParamSet,
    b: &mut ParamSet,
    mut f: impl FnMut(&mut f64, f64, &mut f64, &mut f64),
) {
    let groups = params
        .groups_mut()
        .iter_mut()
        .zip(grad.groups())
        .zip(a.groups_mut().iter_mut().zip(b.groups_mut().iter_mut()));
    for ((p, g), (sa, sb)) in groups {
        let values = p
            .values_mut()
            .iter_mut()
            .zip(g.values())
            .zip(sa.values_mut().iter_mut().zip(sb.values_mut().iter_mut()));
        for ((w, &gk), (x, y)) in values {
            f(w, gk, x, y);
        }
    }
}

fn update_each1(
    params: &mut ParamSet,
    grad: &ParamSet,
    state: &mut ParamSet,
    mut f: impl FnMut(&mut f64, f64, &mut f64),
) {
    let groups = params
        .groups_mut()
        .iter_mut()
        .zip(grad.groups())
        .zip(state.groups_mut().iter_mut());
    for ((p, g), s) in groups {
        let values = p
            .values_mut()
            .iter_mut()
            .zip(g.values())
            .zip(s.values_mut().iter_mut());
        for ((w, &gk), x) in values {
            f(w, gk, x);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sgd {
    config: SgdConfig,
    velocity: ParamSet,
    iterations: u64,
}

impl Sgd {
    pub fn new(config: SgdConfig, params: &ParamSet) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            velocity: params.zeros_like(),
            iterations: 0,
        })
    }

    pub fn config(&self) -> &SgdConfig {
        &self.config
    }

    pub fn velocity(&self) -> &ParamSet {
        &self.velocity
    }

    pub fn effective_lr(&self, iter: u64) -> f64 {
        self.config.lr / (1.0 + self.config.decay * iter as f64)
    }

    /// One update using the decay schedule at `iter` (0 for the first step).
    pub fn step_at(&mut self, params: &mut ParamSet, grad: &ParamSet, iter: u64) -> Result<()> {
        check_shapes(params, grad, &self.velocity)?;
        let lr = self.effective_lr(iter);
        let SgdConfig {
            momentum, nesterov, ..
        } = self.config;
        update_each1(params, grad, &mut self.velocity, |w, g, v| {
            *v = momentum * *v - lr * g;
            if nesterov {
                *w += momentum * *v - lr * g;
            } else {
                *w += *v;
            }
        });
        Ok(())
    }
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut ParamSet, grad: &ParamSet) -> Result<()> {
        self.step_at(params, grad, self.iterations)?;
        self.iterations += 1;
        Ok(())
    }

    fn name(&self) -> &'static str {
        if self.config.nesterov {
            "sgd_accelerated"
        } else {
            "sgd"
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaGrad {
    config: AdaGradConfig,
    accumulator: ParamSet,
}

impl AdaGrad {
    pub fn new(config: AdaGradConfig, params: &ParamSet) -> Result<Self> {
        check_positive("lr", config.lr)?;
        check_eps(config.eps)?;
        Ok(Self {
            config,
            accumulator: params.zeros_like(),
        })
    }

    pub fn accumulator(&self) -> &ParamSet {
        &self.accumulator
    }
}

impl Optimizer for AdaGrad {
    fn step(&mut self, params: &mut ParamSet, grad: &ParamSet) -> Result<()> {
        check_shapes(params, grad, &self.accumulator)?;
        let AdaGradConfig { lr, eps } = self.config;
        update_each1(params, grad, &mut self.accumulator, |w, g, acc| {
            *acc += g * g;
            let denom = (*acc + eps).sqrt();
            if denom > 0.0 {
                *w -= lr * g / denom;
            }
        });
        Ok(())
    }

    fn name(&self) -> &'static str {
        "adagrad"
    }
}

#[derive(Debug, Clone)]
pub struct AdaDelta {
    config: AdaDeltaConfig,
    grad_acc: ParamSet,
    update_acc: ParamSet,
}

impl AdaDelta {
    pub fn new(config: AdaDeltaConfig, params: &ParamSet) -> Result<Self> {
        check_positive("lr", config.lr)?;
        check_unit_open("rho", config.rho)?;
        check_eps(config.eps)?;
        Ok(Self {
            config,
            grad_acc: params.zeros_like(),
            update_acc: params.zeros_like(),
        })
    }

    pub fn grad_acc(&self) -> &ParamSet {
        &self.grad_acc
    }

    pub fn update_acc(&self) -> &ParamSet {
        &self.update_acc
    }
}

impl Optimizer for AdaDelta {
    fn step(&mut self, params: &mut ParamSet, grad: &ParamSet) -> Result<()> {
        check_shapes(params, grad, &self.grad_acc)?;
        let AdaDeltaConfig { lr, rho, eps } = self.config;
        update_each(
            params,
            grad,
            &mut self.grad_acc,
            &mut self.update_acc,
            |w, g, ga, ua| {
                *ga = rho * *ga + (1.0 - rho) * g * g;
                let denom = (*ga + eps).sqrt();
                let delta = if denom > 0.0 {
                    -((*ua + eps).sqrt() / denom) * g
                } else {
                    0.0
                };
                *ua = rho * *ua + (1.0 - rho) * delta * delta;
                *w += lr * delta;
            },
        );
        Ok(())
    }

    fn name(&self) -> &'static str {
        "adadelta"
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: ParamSet,
    v: ParamSet,
    step_count: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Result<Self> {
        check_positive("lr", config.lr)?;
        check_unit_open("beta1", config.beta1)?;
        check_unit_open("beta2", config.beta2)?;
        check_eps(config.eps)?;
        Ok(Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn second_moment(&self) -> &ParamSet {
        &self.v
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut ParamSet, grad: &ParamSet) -> Result<()> {
        check_shapes(params, grad, &self.m)?;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count + 1;
        let bias1 = 1.0 - beta1.powf(t as f64);
        let bias2 = 1.0 - beta2.powf(t as f64);
        update_each(params, grad, &mut self.m, &mut self.v, |w, g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            let denom = v_hat.sqrt() + eps;
            if denom > 0.0 {
                *w -= lr * m_hat / denom;
            }
        });
        self.step_count = t;
        Ok(())
    }

    fn name(&self) -> &'static str {
        "adam"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamGroup;
    use proptest::prelude::*;

    fn scalar(v: f64) -> ParamSet {
        ParamSet::from_point("w", &[v])
    }

    fn value(p: &ParamSet) -> f64 {
        p.groups()[0].values()[0]
    }

    #[test]
    fn sgd_plain_step() {
        let mut w = scalar(1.0);
        let mut opt = Sgd::new(SgdConfig::default(), &w).unwrap();
        opt.step(&mut w, &scalar(2.0)).unwrap();
        assert!((value(&w) - 0.98).abs() < 1e-15);
    }

    #[test]
    fn sgd_momentum_two_steps() {
        // v1 = -0.1, w1 = -0.1; v2 = 0.9·(-0.1) - 0.1 = -0.19, w2 = -0.29.
        let cfg = SgdConfig {
            lr: 0.1,
            momentum: 0.9,
            ..SgdConfig::default()
        };
        let mut w = scalar(0.0);
        let mut opt = Sgd::new(cfg, &w).unwrap();
        opt.step(&mut w, &scalar(1.0)).unwrap();
        assert!((value(opt.velocity()) + 0.1).abs() < 1e-15);
        opt.step(&mut w, &scalar(1.0)).unwrap();
        assert!((value(opt.velocity()) + 0.19).abs() < 1e-15);
        assert!((value(&w) + 0.29).abs() < 1e-15);
    }

    #[test]
    fn sgd_decay_schedule() {
        let cfg = SgdConfig {
            decay: 1e-6,
            ..SgdConfig::default()
        };
        let opt = Sgd::new(cfg, &scalar(0.0)).unwrap();
        assert_eq!(opt.effective_lr(0), 0.01);
        assert!((opt.effective_lr(1_000_000) - 0.005).abs() < 1e-18);
    }

    #[test]
    fn sgd_rejects_bad_config() {
        let w = scalar(0.0);
        let bad = SgdConfig {
            momentum: 1.0,
            ..SgdConfig::default()
        };
        assert!(Sgd::new(bad, &w).is_err());
        let bad = SgdConfig {
            lr: 0.0,
            ..SgdConfig::default()
        };
        assert!(Sgd::new(bad, &w).is_err());
    }

    #[test]
    fn adagrad_examples() {
        let cfg = AdaGradConfig { lr: 0.01, eps: 0.0 };
        let mut w = scalar(0.0);
        let mut opt = AdaGrad::new(cfg, &w).unwrap();
        opt.step(&mut w, &scalar(5.0)).unwrap();
        assert!((value(&w) + 0.01).abs() < 1e-15);

        let mut w = scalar(1.0);
        let mut opt = AdaGrad::new(AdaGradConfig::default(), &w).unwrap();
        opt.step(&mut w, &scalar(0.0)).unwrap();
        assert_eq!(value(&w), 1.0);
        assert_eq!(value(opt.accumulator()), 0.0);

        let cfg = AdaGradConfig { lr: 1.0, eps: 0.0 };
        let mut w = scalar(0.0);
        let mut opt = AdaGrad::new(cfg, &w).unwrap();
        opt.step(&mut w, &scalar(3.0)).unwrap();
        let before = value(&w);
        opt.step(&mut w, &scalar(4.0)).unwrap();
        assert!((value(&w) - before + 0.8).abs() < 1e-15);
    }

    #[test]
    fn adadelta_examples() {
        let mut w = scalar(0.5);
        let mut opt = AdaDelta::new(AdaDeltaConfig::default(), &w).unwrap();
        opt.step(&mut w, &scalar(0.0)).unwrap();
        assert_eq!(value(&w), 0.5);

        let cfg = AdaDeltaConfig {
            lr: 1.0,
            rho: 0.95,
            eps: 1e-6,
        };
        let mut w = scalar(0.0);
        let mut opt = AdaDelta::new(cfg, &w).unwrap();
        opt.step(&mut w, &scalar(1.0)).unwrap();
        let expected = -(1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
        assert!((value(&w) - expected).abs() < 1e-15);
        assert!((expected + 4.47209e-3).abs() < 1e-8);

        let mut w2 = scalar(0.0);
        let mut opt2 = AdaDelta::new(AdaDeltaConfig { lr: 2.0, ..cfg }, &w2).unwrap();
        opt2.step(&mut w2, &scalar(1.0)).unwrap();
        assert!((value(&w2) - 2.0 * expected).abs() < 1e-15);
    }

    #[test]
    fn adam_examples() {
        let cfg = AdamConfig {
            eps: 0.0,
            ..AdamConfig::default()
        };
        for g in [3.0, -0.25, 1e-7] {
            let mut w = scalar(0.0);
            let mut opt = Adam::new(cfg, &w).unwrap();
            opt.step(&mut w, &scalar(g)).unwrap();
            assert!((value(&w) + cfg.lr * g.signum()).abs() < 1e-15, "g={g}");
            assert_eq!(opt.step_count(), 1);
        }

        let mut w = scalar(2.0);
        let mut opt = Adam::new(AdamConfig::default(), &w).unwrap();
        opt.step(&mut w, &scalar(0.0)).unwrap();
        assert_eq!(value(&w), 2.0);
    }

    #[test]
    fn mismatched_gradient_rejected() {
        let mut w = scalar(0.0);
        let other = ParamSet::new(vec![ParamGroup::vector("w", vec![0.0, 0.0]).unwrap()]).unwrap();
        for kind in OptimizerKind::ALL {
            let mut opt = OptimizerConfig::toy_defaults(kind).build(&w).unwrap();
            assert!(matches!(
                opt.step(&mut w, &other),
                Err(Error::StructuralMismatch(_))
            ));
        }
    }

    #[test]
    fn kind_parsing_and_serde() {
        assert_eq!(
            "sgd-accelerated".parse::<OptimizerKind>().unwrap(),
            OptimizerKind::SgdAccelerated
        );
        assert_eq!(
            "AdaDelta".parse::<OptimizerKind>().unwrap(),
            OptimizerKind::AdaDelta
        );
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
        let cfg = OptimizerConfig::toy_defaults(OptimizerKind::AdaDelta);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"kind\":\"adadelta\""));
        assert_eq!(serde_json::from_str::<OptimizerConfig>(&json).unwrap(), cfg);
        let partial: OptimizerConfig = serde_json::from_str(r#"{"kind":"adam","lr":0.5}"#).unwrap();
        assert_eq!(
            partial,
            OptimizerConfig::Adam(AdamConfig {
                lr: 0.5,
                ..AdamConfig::default()
            })
        );
    }

    proptest! {
        #[test]
        fn adam_steps_within_cauchy_schwarz_bound(gs in prop::collection::vec(-1e3..1e3f64, 1..30)) {
            // m̂ and v̂ are weighted sums Σ a_i g_i and Σ b_i g_i², so
            // |m̂|/√v̂ ≤ √(Σ a_i²/b_i). The bound is exactly 1 at the first step.
            let cfg = AdamConfig::default();
            let mut w = scalar(0.0);
            let mut opt = Adam::new(cfg, &w).unwrap();
            for (k, &g) in gs.iter().enumerate() {
                let t = (k + 1) as i32;
                let bound: f64 = (1..=t)
                    .map(|i| {
                        let a = (1.0 - cfg.beta1) * cfg.beta1.powi(t - i) / (1.0 - cfg.beta1.powi(t));
                        let b = (1.0 - cfg.beta2) * cfg.beta2.powi(t - i) / (1.0 - cfg.beta2.powi(t));
                        a * a / b
                    })
                    .sum::<f64>()
                    .sqrt();
                let before = value(&w);
                opt.step(&mut w, &scalar(g)).unwrap();
                prop_assert!((value(&w) - before).abs() <= cfg.lr * bound * (1.0 + 1e-9));
                if t == 1 {
                    prop_assert!((bound - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn adam_constant_gradient_steps_at_most_lr(g in -1e3..1e3f64, n in 1usize..50) {
            let mut w = scalar(0.0);
            let mut opt = Adam::new(AdamConfig::default(), &w).unwrap();
            for _ in 0..n {
                let before = value(&w);
                opt.step(&mut w, &scalar(g)).unwrap();
                prop_assert!((value(&w) - before).abs() <= 0.01 * (1.0 + 1e-9));
            }
        }

        #[test]
        fn adagrad_steps_shrink_for_constant_magnitude(
            g in 1e-3..1e2f64, signs in prop::collection::vec(any::<bool>(), 2..40)
        ) {
            let mut w = scalar(0.0);
            let mut opt = AdaGrad::new(AdaGradConfig::default(), &w).unwrap();
            let mut last = f64::INFINITY;
            for s in signs {
                let before = value(&w);
                opt.step(&mut w, &scalar(if s { g } else { -g })).unwrap();
                let step = (value(&w) - before).abs();
                prop_assert!(step <= last * (1.0 + 1e-12));
                last = step;
            }
            prop_assert!(opt.accumulator().flatten().iter().all(|&a| a >= 0.0));
        }
    }
}
