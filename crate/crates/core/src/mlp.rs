//! Dense feed-forward network with ReLU hidden layers, softmax or sigmoid
//! output, inverted dropout and hand-written backpropagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{ParamGroup, ParamSet};
use crate::rng::SeededRng;

/// Probabilities are clipped to `[PROB_CLIP, 1 − PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HiddenActivation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OutputActivation {
    #[default]
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LossKind {
    #[default]
    CategoricalCe,
    BinaryCe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub hidden_activation: HiddenActivation,
    #[serde(default)]
    pub output_activation: OutputActivation,
    #[serde(default)]
    pub dropout_prob: f64,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        output_activation: OutputActivation,
        dropout_prob: f64,
    ) -> Self {
        Self {
            layer_sizes,
            hidden_activation: HiddenActivation::Relu,
            output_activation,
            dropout_prob,
        }
    }

    /// 64→32→32→10 on 8×8 inputs, dropout 0.2.
    pub fn reduced_mnist() -> Self {
        Self::new(vec![64, 32, 32, 10], OutputActivation::Softmax, 0.2)
    }

    /// 784→512→512→10, dropout 0.2.
    pub fn full_mnist() -> Self {
        Self::new(vec![784, 512, 512, 10], OutputActivation::Softmax, 0.2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs at least an input and an output layer".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "layer sizes must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidParameter(format!(
                "dropout probability must lie in [0, 1), got {}",
                self.dropout_prob
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }
}

pub fn weight_name(layer: usize) -> String {
    format!("W{layer}")
}

pub fn bias_name(layer: usize) -> String {
    format!("b{layer}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::StructuralMismatch(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    /// Rows `indices` of this batch.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let pick = |m: &Matrix| {
            let mut data = Vec::with_capacity(indices.len() * m.cols());
            for &i in indices {
                data.extend_from_slice(m.row(i));
            }
            Matrix::from_vec(indices.len(), m.cols(), data).expect("row-sized data")
        };
        Batch {
            inputs: pick(&self.inputs),
            targets: pick(&self.targets),
        }
    }
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    fingerprint: u64,
    /// Layer inputs: `activations[0]` is the batch, `activations[k]` the
    /// (dropped-out) output of hidden layer `k − 1`.
    activations: Vec<Matrix>,
    /// Hidden pre-activations.
    pre_activations: Vec<Matrix>,
    masks: Vec<Option<Matrix>>,
    outputs: Matrix,
}

impl ForwardCache {
    pub fn outputs(&self) -> &Matrix {
        &self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: ParamSet,
}

impl Mlp {
    /// Glorot-uniform weights in `±√(6/(fan_in + fan_out))`, zero biases.
    pub fn init(spec: MlpSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let mut groups = Vec::with_capacity(2 * spec.n_layers());
        for k in 0..spec.n_layers() {
            let (fan_in, fan_out) = (spec.layer_sizes[k], spec.layer_sizes[k + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-limit, limit))
                .collect();
            groups.push(ParamGroup::new(weight_name(k), w, vec![fan_in, fan_out])?);
            groups.push(ParamGroup::zeros(bias_name(k), vec![fan_out])?);
        }
        Ok(Self {
            spec,
            params: ParamSet::new(groups)?,
        })
    }

    pub fn from_params(spec: MlpSpec, params: ParamSet) -> Result<Self> {
        spec.validate()?;
        for k in 0..spec.n_layers() {
            let (fan_in, fan_out) = (spec.layer_sizes[k], spec.layer_sizes[k + 1]);
            let ok = params.groups().len() == 2 * spec.n_layers()
                && params.groups()[2 * k].name() == weight_name(k)
                && params.groups()[2 * k].shape() == [fan_in, fan_out]
                && params.groups()[2 * k + 1].name() == bias_name(k)
                && params.groups()[2 * k + 1].shape() == [fan_out];
            if !ok {
                return Err(Error::StructuralMismatch(format!(
                    "parameters do not match layer sizes {:?}",
                    spec.layer_sizes
                )));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn weight(&self, k: usize) -> Matrix {
        let g = &self.params.groups()[2 * k];
        Matrix::from_vec(g.shape()[0], g.shape()[1], g.values().to_vec())
            .expect("shape checked at construction")
    }

    fn bias(&self, k: usize) -> &[f64] {
        self.params.groups()[2 * k + 1].values()
    }

    fn fingerprint(&self) -> u64 {
        // FNV-1a over the parameter bits.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for g in self.params.groups() {
            for v in g.values() {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    /// Forward pass. Dropout is applied to hidden activations only when
    /// `train_mode` is set and the spec's dropout probability is positive.
    pub fn forward(
        &self,
        inputs: &Matrix,
        train_mode: bool,
        rng: &mut SeededRng,
    ) -> Result<ForwardCache> {
        if inputs.cols() != self.spec.input_dim() {
            return Err(Error::StructuralMismatch(format!(
                "network expects {} input features, batch has {}",
                self.spec.input_dim(),
                inputs.cols()
            )));
        }
        let n_layers = self.spec.n_layers();
        let drop = self.spec.dropout_prob;
        let use_dropout = train_mode && drop > 0.0;
        let keep_scale = 1.0 / (1.0 - drop);

        let mut activations = vec![inputs.clone()];
        let mut pre_activations = Vec::with_capacity(n_layers - 1);
        let mut masks = Vec::with_capacity(n_layers - 1);
        let mut outputs = None;
        for k in 0..n_layers {
            let mut z = activations[k].matmul(&self.weight(k))?;
            let b = self.bias(k);
            for r in 0..z.rows() {
                for (v, bj) in z.row_mut(r).iter_mut().zip(b) {
                    *v += bj;
                }
            }
            if k + 1 < n_layers {
                let mut h = z.clone();
                for v in h.as_mut_slice() {
                    *v = v.max(0.0);
                }
                let mask = if use_dropout {
                    let mut m = Matrix::zeros(h.rows(), h.cols());
                    for (mv, hv) in m.as_mut_slice().iter_mut().zip(h.as_mut_slice()) {
                        *mv = if rng.bernoulli(drop) { 0.0 } else { keep_scale };
                        *hv *= *mv;
                    }
                    Some(m)
                } else {
                    None
                };
                pre_activations.push(z);
                masks.push(mask);
                activations.push(h);
            } else {
                match self.spec.output_activation {
                    OutputActivation::Softmax => softmax_rows(&mut z),
                    OutputActivation::Sigmoid => {
                        for v in z.as_mut_slice() {
                            *v = sigmoid(*v);
                        }
                    }
                }
                outputs = Some(z);
            }
        }
        Ok(ForwardCache {
            layer_sizes: self.spec.layer_sizes.clone(),
            fingerprint: self.fingerprint(),
            activations,
            pre_activations,
            masks,
            outputs: outputs.expect("at least one layer"),
        })
    }

    /// Gradient of [`loss`] with respect to every parameter group.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        targets: &Matrix,
        kind: LossKind,
    ) -> Result<ParamSet> {
        if cache.layer_sizes != self.spec.layer_sizes || cache.fingerprint != self.fingerprint() {
            return Err(Error::StructuralMismatch(
                "forward cache does not belong to this network state".into(),
            ));
        }
        let outputs = &cache.outputs;
        check_loss_shapes(outputs, targets)?;
        let n_layers = self.spec.n_layers();
        let mut delta = output_delta(outputs, targets, kind, self.spec.output_activation);

        let mut grads: Vec<ParamGroup> = Vec::with_capacity(2 * n_layers);
        for k in (0..n_layers).rev() {
            let a = &cache.activations[k];
            let dw = a.t_matmul(&delta)?;
            let mut db = vec![0.0; delta.cols()];
            for r in 0..delta.rows() {
                for (s, v) in db.iter_mut().zip(delta.row(r)) {
                    *s += v;
                }
            }
            grads.push(ParamGroup::new(bias_name(k), db, vec![delta.cols()])?);
            grads.push(ParamGroup::new(
                weight_name(k),
                dw.into_vec(),
                vec![a.cols(), delta.cols()],
            )?);
            if k > 0 {
                let mut da = delta.matmul_t(&self.weight(k))?;
                let z = &cache.pre_activations[k - 1];
                let mask = cache.masks[k - 1].as_ref();
                for (i, v) in da.as_mut_slice().iter_mut().enumerate() {
                    if z.as_slice()[i] <= 0.0 {
                        *v = 0.0;
                    } else if let Some(m) = mask {
                        *v *= m.as_slice()[i];
                    }
                }
                delta = da;
            }
        }
        grads.reverse();
        // Reversal leaves each layer as (W, b).
        ParamSet::new(grads)
    }

    /// Eval-mode loss and gradient on a batch.
    pub fn loss_and_grad(&self, batch: &Batch, kind: LossKind) -> Result<(f64, ParamSet)> {
        let mut unused = SeededRng::new(0, crate::rng::Stream::Dropout);
        let cache = self.forward(&batch.inputs, false, &mut unused)?;
        let l = loss(cache.outputs(), &batch.targets, kind)?;
        let g = self.backward(&cache, &batch.targets, kind)?;
        Ok((l, g))
    }

    /// Eval-mode loss on a batch.
    pub fn eval_loss(&self, batch: &Batch, kind: LossKind) -> Result<f64> {
        let mut unused = SeededRng::new(0, crate::rng::Stream::Dropout);
        let cache = self.forward(&batch.inputs, false, &mut unused)?;
        loss(cache.outputs(), &batch.targets, kind)
    }

    /// Fraction of rows whose arg-max output matches the arg-max target.
    pub fn accuracy(&self, batch: &Batch) -> Result<f64> {
        let mut unused = SeededRng::new(0, crate::rng::Stream::Dropout);
        let cache = self.forward(&batch.inputs, false, &mut unused)?;
        let out = cache.outputs();
        let hits = (0..out.rows())
            .filter(|&r| argmax(out.row(r)) == argmax(batch.targets.row(r)))
            .count();
        Ok(hits as f64 / out.rows().max(1) as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(z: &mut Matrix) {
    for r in 0..z.rows() {
        let row = z.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

fn check_loss_shapes(outputs: &Matrix, targets: &Matrix) -> Result<()> {
    if outputs.rows() != targets.rows() || outputs.cols() != targets.cols() {
        return Err(Error::StructuralMismatch(format!(
            "outputs are {}x{}, targets {}x{}",
            outputs.rows(),
            outputs.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if outputs.rows() == 0 {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    Ok(())
}

/// Categorical CE: batch mean of `−Σ_c t_c log o_c`. Binary CE: mean over
/// batch and units of `−[t log o + (1 − t) log(1 − o)]`.
pub fn loss(outputs: &Matrix, targets: &Matrix, kind: LossKind) -> Result<f64> {
    check_loss_shapes(outputs, targets)?;
    let pairs = outputs.as_slice().iter().zip(targets.as_slice());
    Ok(match kind {
        LossKind::CategoricalCe => {
            let total: f64 = pairs
                .filter(|(_, &t)| t != 0.0)
                .map(|(&o, &t)| -t * clip(o).ln())
                .sum();
            total / outputs.rows() as f64
        }
        LossKind::BinaryCe => {
            let total: f64 = pairs
                .map(|(&o, &t)| {
                    let o = clip(o);
                    -(t * o.ln() + (1.0 - t) * (1.0 - o).ln())
                })
                .sum();
            total / (outputs.rows() * outputs.cols()) as f64
        }
    })
}

/// Gradient of the loss at the output pre-activation.
fn output_delta(
    outputs: &Matrix,
    targets: &Matrix,
    kind: LossKind,
    activation: OutputActivation,
) -> Matrix {
    let batch = outputs.rows() as f64;
    let units = outputs.cols() as f64;
    let mut delta = Matrix::zeros(outputs.rows(), outputs.cols());
    match (kind, activation) {
        (LossKind::CategoricalCe, OutputActivation::Softmax) => {
            for ((d, &o), &t) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(outputs.as_slice())
                .zip(targets.as_slice())
            {
                *d = (o - t) / batch;
            }
        }
        (LossKind::BinaryCe, OutputActivation::Sigmoid) => {
            for ((d, &o), &t) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(outputs.as_slice())
                .zip(targets.as_slice())
            {
                *d = (o - t) / (batch * units);
            }
        }
        _ => {
            // Generic chain rule: dL/do, then through the output activation.
            let mut d_out = Matrix::zeros(outputs.rows(), outputs.cols());
            for ((d, &o), &t) in d_out
                .as_mut_slice()
                .iter_mut()
                .zip(outputs.as_slice())
                .zip(targets.as_slice())
            {
                let o = clip(o);
                *d = match kind {
                    LossKind::CategoricalCe => -t / o / batch,
                    LossKind::BinaryCe => (-t / o + (1.0 - t) / (1.0 - o)) / (batch * units),
                };
            }
            for r in 0..outputs.rows() {
                let o = outputs.row(r);
                let g = d_out.row(r);
                match activation {
                    OutputActivation::Sigmoid => {
                        for (j, d) in delta.row_mut(r).iter_mut().enumerate() {
                            *d = g[j] * o[j] * (1.0 - o[j]);
                        }
                    }
                    OutputActivation::Softmax => {
                        let dot: f64 = o.iter().zip(g).map(|(a, b)| a * b).sum();
                        for (j, d) in delta.row_mut(r).iter_mut().enumerate() {
                            *d = o[j] * (g[j] - dot);
                        }
                    }
                }
            }
        }
    }
    delta
}
