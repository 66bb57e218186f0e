use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Dataset, ExperimentConfig, ExperimentKind, MlpSettings};
use super::write_csv;
use crate::analysis::{fd_hessian, spectrum_report, sym_eigenvalues, SpectrumReport};
use crate::cpn::{charged_step, CpnConfig, CpnState};
use crate::data::{downsample_batch, load_mnist, make_synthetic};
use crate::error::{Error, Result};
use crate::mlp::{Batch, Mlp};
use crate::params::{ParamGroup, ParamSet};
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataOrigin {
    Mnist,
    Synthetic,
}

/// Loads the configured dataset, shaped for the network's input width.
pub fn prepare_data(settings: &MlpSettings, seed: u64) -> Result<(Batch, DataOrigin)> {
    let spec = &settings.spec;
    let synthetic = |seed| {
        let mut rng = SeededRng::new(seed, Stream::Data);
        make_synthetic(
            spec.output_dim(),
            spec.input_dim(),
            settings.samples,
            &mut rng,
        )
        .map(|b| (b, DataOrigin::Synthetic))
    };
    if settings.dataset == Dataset::Synthetic {
        return synthetic(seed);
    }
    let raw = match load_mnist(settings.data_dir.as_deref()) {
        Ok(b) => b,
        Err(Error::DatasetNotFound(what)) if settings.synthetic_fallback => {
            log::warn!("MNIST not found ({what}); using synthetic clusters");
            return synthetic(seed);
        }
        Err(e) => return Err(e),
    };
    let n = settings.samples.min(raw.len());
    let raw = raw.select(&(0..n).collect::<Vec<_>>());
    let batch = match spec.input_dim() {
        784 => raw,
        64 => downsample_batch(&raw)?,
        d => {
            return Err(Error::StructuralMismatch(format!(
                "MNIST feeds 784 or 64 inputs, network expects {d}"
            )))
        }
    };
    if batch.targets.cols() != spec.output_dim() {
        return Err(Error::StructuralMismatch(format!(
            "MNIST has {} classes, network outputs {}",
            batch.targets.cols(),
            spec.output_dim()
        )));
    }
    Ok((batch, DataOrigin::Mnist))
}

fn mlp_settings(config: &ExperimentConfig, kind: ExperimentKind) -> Result<&MlpSettings> {
    if config.experiment != kind {
        return Err(Error::Config(format!(
            "expected a {kind:?} config, got {:?}",
            config.experiment
        )));
    }
    config.validate()?;
    Ok(config.mlp.as_ref().expect("validated"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Eval-mode loss over the whole training set at the end of the epoch.
    pub loss: f64,
    /// Mean train-mode mini-batch loss during the epoch (epoch 0: `loss`).
    pub train_loss: f64,
    /// `R_t` at the end of the epoch; 0 without CPN.
    pub penalty: f64,
    /// Mean 2-norm of the applied gradient during the epoch.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub cpn: bool,
    pub curve: Vec<EpochRecord>,
    /// `R_t` at the first and last optimizer step (0 without CPN).
    pub first_step_penalty: f64,
    pub last_step_penalty: f64,
    pub final_params: ParamSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub origin: DataOrigin,
    pub baseline: TrainRun,
    pub charged: Option<TrainRun>,
}

fn train_once(
    config: &ExperimentConfig,
    settings: &MlpSettings,
    data: &Batch,
    init: &Mlp,
    cpn: Option<CpnConfig>,
) -> Result<TrainRun> {
    let mut net = init.clone();
    let mut optimizer = config.optimizer.build(net.params())?;
    let mut state = match cpn {
        Some(c) => Some(CpnState::init(
            net.params(),
            c,
            &mut SeededRng::new(config.seed, Stream::EpsNoise),
        )?),
        None => None,
    };
    let mut shuffle = SeededRng::new(config.seed, Stream::Shuffle);
    let mut dropout = SeededRng::new(config.seed, Stream::Dropout);
    let initial = net.eval_loss(data, settings.loss)?;
    let mut curve = vec![EpochRecord {
        epoch: 0,
        loss: initial,
        train_loss: initial,
        penalty: match &state {
            Some(s) => s.penalty(net.params())?,
            None => 0.0,
        },
        grad_norm: 0.0,
    }];
    let mut first_step_penalty = None;
    let mut last_step_penalty = 0.0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=config.iterations {
        shuffle.shuffle(&mut order);
        let (mut loss_sum, mut norm_sum, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(settings.batch_size) {
            let batch = data.select(chunk);
            let cache = net.forward(&batch.inputs, true, &mut dropout)?;
            loss_sum += crate::mlp::loss(cache.outputs(), &batch.targets, settings.loss)?;
            let grad = net.backward(&cache, &batch.targets, settings.loss)?;
            if let Some(s) = &state {
                last_step_penalty = s.penalty(net.params())?;
                first_step_penalty.get_or_insert(last_step_penalty);
            }
            let applied =
                charged_step(optimizer.as_mut(), state.as_mut(), net.params_mut(), &grad)?;
            norm_sum += applied.l2_norm();
            steps += 1;
        }
        if !net.params().all_finite() {
            return Err(Error::NumericalFailure(format!(
                "parameters became non-finite in epoch {epoch}"
            )));
        }
        curve.push(EpochRecord {
            epoch,
            loss: net.eval_loss(data, settings.loss)?,
            train_loss: loss_sum / steps as f64,
            penalty: match &state {
                Some(s) => s.penalty(net.params())?,
                None => 0.0,
            },
            grad_norm: norm_sum / steps as f64,
        });
    }
    Ok(TrainRun {
        cpn: state.is_some(),
        curve,
        first_step_penalty: first_step_penalty.unwrap_or(0.0),
        last_step_penalty,
        final_params: net.params().clone(),
    })
}

/// Mini-batch training of the baseline and (when configured) the CPN network
/// from identical initial weights.
pub fn run_mlp_train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    let settings = mlp_settings(config, ExperimentKind::MlpTrain)?;
    let (data, origin) = prepare_data(settings, config.seed)?;
    let init = Mlp::init(
        settings.spec.clone(),
        &mut SeededRng::new(config.seed, Stream::WeightInit),
    )?;
    let baseline = train_once(config, settings, &data, &init, None)?;
    let charged = match config.cpn {
        Some(c) => Some(train_once(config, settings, &data, &init, Some(c))?),
        None => None,
    };
    Ok(TrainOutcome {
        origin,
        baseline,
        charged,
    })
}

pub fn write_train_outputs(outcome: &TrainOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for run in std::iter::once(&outcome.baseline).chain(outcome.charged.as_ref()) {
        let path = dir.join(format!("mlp_train_{}.csv", run_label(run.cpn)));
        write_csv(&path, &run.curve)?;
        paths.push(path);
    }
    Ok(paths)
}

fn run_label(cpn: bool) -> &'static str {
    if cpn {
        "cpn"
    } else {
        "base"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpectrum {
    pub group: String,
    pub report: SpectrumReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRun {
    pub cpn: bool,
    pub steps: u64,
    pub converged: bool,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub groups: Vec<GroupSpectrum>,
}

impl SpectrumRun {
    pub fn group(&self, name: &str) -> Option<&SpectrumReport> {
        self.groups
            .iter()
            .find(|g| g.group == name)
            .map(|g| &g.report)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumOutcome {
    pub origin: DataOrigin,
    pub baseline: SpectrumRun,
    pub charged: Option<SpectrumRun>,
}

/// Hessian of the data loss with respect to one group, the others fixed.
fn group_hessian(
    net: &Mlp,
    data: &Batch,
    settings: &MlpSettings,
    group: usize,
) -> Result<Vec<f64>> {
    let x0 = net.params().groups()[group].values().to_vec();
    let mut probe = net.clone();
    let mut failure = None;
    let h = fd_hessian(
        |x: &[f64]| {
            probe.params_mut().groups_mut()[group]
                .values_mut()
                .copy_from_slice(x);
            match probe.loss_and_grad(data, settings.loss) {
                Ok((_, g)) => g.groups()[group].values().to_vec(),
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![f64::NAN; x.len()]
                }
            }
        },
        &x0,
        settings.fd_step,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    sym_eigenvalues(&h?)
}

fn spectrum_once(
    config: &ExperimentConfig,
    settings: &MlpSettings,
    data: &Batch,
    init: &Mlp,
    cpn: Option<CpnConfig>,
) -> Result<SpectrumRun> {
    let mut net = init.clone();
    let mut optimizer = config.optimizer.build(net.params())?;
    let mut state = match cpn {
        Some(c) => Some(CpnState::init(
            net.params(),
            c,
            &mut SeededRng::new(config.seed, Stream::EpsNoise),
        )?),
        None => None,
    };
    let mut steps = 0;
    let mut converged = false;
    let (mut loss, mut grad) = net.loss_and_grad(data, settings.loss)?;
    while steps < config.iterations {
        if grad.l2_norm() < settings.grad_tol {
            converged = true;
            break;
        }
        charged_step(optimizer.as_mut(), state.as_mut(), net.params_mut(), &grad)?;
        steps += 1;
        (loss, grad) = net.loss_and_grad(data, settings.loss)?;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "loss became non-finite after {steps} steps"
            )));
        }
    }
    let final_grad_norm = grad.l2_norm();
    converged |= final_grad_norm < settings.grad_tol;
    if !converged {
        log::warn!(
            "{} run stopped at the {steps}-step cap with gradient norm {final_grad_norm:e}",
            run_label(cpn.is_some())
        );
    }

    let mut groups = Vec::new();
    for (i, g) in net.params().groups().iter().enumerate() {
        let eigs = group_hessian(&net, data, settings, i)?;
        groups.push(GroupSpectrum {
            group: g.name().to_string(),
            report: spectrum_report(&eigs, settings.eig_tol)?,
        });
    }
    Ok(SpectrumRun {
        cpn: cpn.is_some(),
        steps,
        converged,
        final_loss: loss,
        final_grad_norm,
        groups,
    })
}

/// Full-batch training of the baseline and CPN networks from identical
/// weights, followed by per-group Hessian spectra at the final points.
pub fn run_mlp_spectrum(config: &ExperimentConfig) -> Result<SpectrumOutcome> {
    let settings = mlp_settings(config, ExperimentKind::MlpSpectrum)?;
    let (data, origin) = prepare_data(settings, config.seed)?;
    let init = Mlp::init(
        settings.spec.clone(),
        &mut SeededRng::new(config.seed, Stream::WeightInit),
    )?;
    let baseline = spectrum_once(config, settings, &data, &init, None)?;
    let charged = match config.cpn {
        Some(c) => Some(spectrum_once(config, settings, &data, &init, Some(c))?),
        None => None,
    };
    Ok(SpectrumOutcome {
        origin,
        baseline,
        charged,
    })
}

#[derive(Serialize)]
struct EigenRow<'a> {
    group: &'a str,
    index: usize,
    eigenvalue: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    run: &'a str,
    group: &'a str,
    n: usize,
    n_negative: usize,
    n_near_zero: usize,
    n_positive: usize,
    lambda_min: f64,
    lambda_max: f64,
    spread: f64,
    classification: &'a str,
    steps: u64,
    converged: bool,
    final_loss: f64,
    final_grad_norm: f64,
}

pub fn spectrum_file_name(cpn: bool, group: &str) -> String {
    format!("spectrum_{}_{group}.csv", run_label(cpn))
}

/// Writes one eigenvalue CSV per group per run plus `spectrum_summary.csv`.
pub fn write_spectrum_outputs(outcome: &SpectrumOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let mut summary = Vec::new();
    for run in std::iter::once(&outcome.baseline).chain(outcome.charged.as_ref()) {
        for g in &run.groups {
            let rows: Vec<EigenRow> = g
                .report
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(index, &eigenvalue)| EigenRow {
                    group: &g.group,
                    index,
                    eigenvalue,
                })
                .collect();
            let path = dir.join(spectrum_file_name(run.cpn, &g.group));
            write_csv(&path, &rows)?;
            paths.push(path);
            summary.push(SummaryRow {
                run: run_label(run.cpn),
                group: &g.group,
                n: g.report.eigenvalues.len(),
                n_negative: g.report.n_negative,
                n_near_zero: g.report.n_near_zero,
                n_positive: g.report.n_positive,
                lambda_min: g.report.lambda_min,
                lambda_max: g.report.lambda_max,
                spread: g.report.spread(),
                classification: g.report.classification.as_str(),
                steps: run.steps,
                converged: run.converged,
                final_loss: run.final_loss,
                final_grad_norm: run.final_grad_norm,
            });
        }
    }
    let path = dir.join("spectrum_summary.csv");
    write_csv(&path, &summary)?;
    paths.push(path);
    Ok(paths)
}

/// Parameter count per group, for checking CSV row counts.
pub fn group_sizes(params: &ParamSet) -> Vec<(String, usize)> {
    params
        .groups()
        .iter()
        .map(|g: &ParamGroup| (g.name().to_string(), g.len()))
        .collect()
}
