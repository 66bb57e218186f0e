use cpn_core::data::make_synthetic;
use cpn_core::mlp::{loss, Batch, LossKind, Mlp, MlpSpec, OutputActivation};
use cpn_core::{axpy, Matrix, SeededRng, Stream};

fn random_net(rng: &mut SeededRng, output: OutputActivation) -> (Mlp, MlpSpec) {
    let depth = 1 + rng.index(3);
    let mut sizes = vec![2 + rng.index(5)];
    for _ in 0..depth {
        sizes.push(2 + rng.index(5));
    }
    let spec = MlpSpec::new(sizes, output, 0.0);
    let net = Mlp::init(spec.clone(), rng).unwrap();
    // Perturb biases off zero so ReLU kinks are unlikely at the probe point.
    let params = net.params().map(|v| v + 0.1 * rng.normal());
    (Mlp::from_params(spec.clone(), params).unwrap(), spec)
}

fn random_batch(rng: &mut SeededRng, spec: &MlpSpec, kind: LossKind, rows: usize) -> Batch {
    let inputs = Matrix::from_vec(
        rows,
        spec.input_dim(),
        (0..rows * spec.input_dim()).map(|_| rng.normal()).collect(),
    )
    .unwrap();
    let k = spec.output_dim();
    let mut targets = Matrix::zeros(rows, k);
    for r in 0..rows {
        match kind {
            LossKind::CategoricalCe => targets.as_mut_slice()[r * k + rng.index(k)] = 1.0,
            LossKind::BinaryCe => {
                for v in targets.row_mut(r) {
                    *v = rng.uniform(0.0, 1.0);
                }
            }
        }
    }
    Batch::new(inputs, targets).unwrap()
}

/// Worst relative disagreement between backprop and central differences
/// along 20 random directions.
fn worst_fd_error(
    net: &Mlp,
    spec: &MlpSpec,
    batch: &Batch,
    kind: LossKind,
    rng: &mut SeededRng,
) -> f64 {
    let (_, grad) = net.loss_and_grad(batch, kind).unwrap();
    let grad = grad.flatten();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dir = net.params().map(|_| rng.normal());
        let at = |s: f64| {
            let p = axpy(s, &dir, net.params()).unwrap();
            Mlp::from_params(spec.clone(), p)
                .unwrap()
                .eval_loss(batch, kind)
                .unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let an: f64 = grad.iter().zip(dir.flatten()).map(|(g, d)| g * d).sum();
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-7));
    }
    worst
}

#[test]
fn backprop_matches_finite_differences_on_random_nets() {
    let mut rng = SeededRng::new(41, Stream::Test);
    for i in 0..25 {
        let (output, kind) = if i % 2 == 0 {
            (OutputActivation::Softmax, LossKind::CategoricalCe)
        } else {
            (OutputActivation::Sigmoid, LossKind::BinaryCe)
        };
        let (net, spec) = random_net(&mut rng, output);
        let batch = random_batch(&mut rng, &spec, kind, 5);
        let err = worst_fd_error(&net, &spec, &batch, kind, &mut rng);
        assert!(err < 1e-5, "net {i} {:?}: {err}", spec.layer_sizes);
    }
}

#[test]
fn outputs_are_valid_probabilities() {
    let mut rng = SeededRng::new(42, Stream::Test);
    for _ in 0..25 {
        let (net, spec) = random_net(&mut rng, OutputActivation::Softmax);
        let batch = random_batch(&mut rng, &spec, LossKind::CategoricalCe, 7);
        let out = net.forward(&batch.inputs, false, &mut rng).unwrap();
        for r in 0..7 {
            assert!((out.outputs().row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let (net, spec) = random_net(&mut rng, OutputActivation::Sigmoid);
        let batch = random_batch(&mut rng, &spec, LossKind::BinaryCe, 7);
        let out = net.forward(&batch.inputs, false, &mut rng).unwrap();
        assert!(out.outputs().as_slice().iter().all(|&o| o > 0.0 && o < 1.0));
    }
}

#[test]
fn uniform_prediction_costs_ln_ten() {
    let out = Matrix::from_vec(4, 10, vec![0.1; 40]).unwrap();
    let mut targets = Matrix::zeros(4, 10);
    for r in 0..4 {
        targets.as_mut_slice()[r * 10 + 3 * r] = 1.0;
    }
    let l = loss(&out, &targets, LossKind::CategoricalCe).unwrap();
    assert!((l - 10f64.ln()).abs() < 1e-12);
}

#[test]
fn eval_mode_is_bitwise_dropout_free() {
    let mut rng = SeededRng::new(43, Stream::Test);
    let spec = MlpSpec::new(vec![6, 9, 9, 4], OutputActivation::Softmax, 0.4);
    let net = Mlp::init(spec.clone(), &mut rng).unwrap();
    let plain = Mlp::from_params(
        MlpSpec {
            dropout_prob: 0.0,
            ..spec.clone()
        },
        net.params().clone(),
    )
    .unwrap();
    let batch = random_batch(&mut rng, &spec, LossKind::CategoricalCe, 11);
    let a = net
        .forward(
            &batch.inputs,
            false,
            &mut SeededRng::new(1, Stream::Dropout),
        )
        .unwrap();
    let b = plain
        .forward(&batch.inputs, true, &mut SeededRng::new(2, Stream::Dropout))
        .unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.outputs()), bits(b.outputs()));
    let c = net
        .forward(&batch.inputs, true, &mut SeededRng::new(3, Stream::Dropout))
        .unwrap();
    assert_ne!(bits(a.outputs()), bits(c.outputs()));
}

#[test]
fn full_batch_sgd_reduces_loss_on_separable_data() {
    let batch = make_synthetic(2, 4, 200, &mut SeededRng::new(44, Stream::Data)).unwrap();
    for (output, kind) in [
        (OutputActivation::Softmax, LossKind::CategoricalCe),
        (OutputActivation::Sigmoid, LossKind::BinaryCe),
    ] {
        let spec = MlpSpec::new(vec![4, 8, 2], output, 0.0);
        let mut net = Mlp::init(spec, &mut SeededRng::new(45, Stream::WeightInit)).unwrap();
        let first = net.eval_loss(&batch, kind).unwrap();
        for _ in 0..50 {
            let (_, g) = net.loss_and_grad(&batch, kind).unwrap();
            *net.params_mut() = axpy(-0.05, &g, net.params()).unwrap();
        }
        let last = net.eval_loss(&batch, kind).unwrap();
        assert!(last < first, "{kind:?}: {first} -> {last}");
    }
}
