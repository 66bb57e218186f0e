use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cpn::CpnConfig;
use crate::error::{Error, Result};
use crate::mlp::{LossKind, MlpSpec, OutputActivation};
use crate::optimizers::{OptimizerConfig, OptimizerKind, SgdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Toy,
    MlpTrain,
    MlpSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// MNIST IDX files, falling back to synthetic clusters when allowed.
    #[default]
    Mnist,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSettings {
    pub spec: MlpSpec,
    pub loss: LossKind,
    pub batch_size: usize,
    pub dataset: Dataset,
    /// Directory holding the IDX files; `$CPN_DATA_DIR` when absent.
    pub data_dir: Option<PathBuf>,
    pub synthetic_fallback: bool,
    /// Number of samples to use (synthetic size, or a prefix of MNIST).
    pub samples: usize,
    /// Spectrum runs stop once the full-batch gradient norm drops below this.
    pub grad_tol: f64,
    pub fd_step: f64,
    pub eig_tol: f64,
}

impl Default for MlpSettings {
    fn default() -> Self {
        Self {
            spec: MlpSpec::reduced_mnist(),
            loss: LossKind::CategoricalCe,
            batch_size: 128,
            dataset: Dataset::Mnist,
            data_dir: None,
            synthetic_fallback: true,
            samples: 2000,
            grad_tol: 1e-4,
            fd_step: crate::analysis::DEFAULT_FD_STEP,
            eig_tol: crate::analysis::DEFAULT_EIGEN_TOL,
        }
    }
}

impl MlpSettings {
    /// 784→512→512→10 on raw 28×28 inputs.
    pub fn full_scale() -> Self {
        Self {
            spec: MlpSpec::full_mnist(),
            samples: 60_000,
            ..Self::default()
        }
    }

    /// One hidden layer on 8×8 inputs, sized so that the per-group Hessians
    /// stay small enough to eigensolve quickly.
    pub fn spectrum_default() -> Self {
        Self {
            spec: MlpSpec::new(vec![64, 8, 10], OutputActivation::Softmax, 0.0),
            samples: 500,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub optimizer: OptimizerConfig,
    /// Absent for the plain baseline.
    #[serde(default)]
    pub cpn: Option<CpnConfig>,
    /// Toy: optimizer steps. MLP training: epochs. Spectrum: step cap.
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start_point: Option<Vec<f64>>,
    #[serde(default)]
    pub mlp: Option<MlpSettings>,
    pub output_dir: PathBuf,
}

pub const TOY_ITERATIONS: u64 = 120;
pub const TOY_START: [f64; 2] = [1e-4, -1e-4];

/// Toy-problem CPN hyperparameters. Plain and accelerated SGD share one set,
/// the adaptive methods the other; both use `p = 1`.
pub fn toy_cpn_preset(kind: OptimizerKind) -> CpnConfig {
    let (alpha, beta, lambda) = match kind {
        OptimizerKind::Sgd | OptimizerKind::SgdAccelerated => (0.1, 1.0, 0.1),
        OptimizerKind::AdaGrad | OptimizerKind::AdaDelta | OptimizerKind::Adam => (0.5, 1.0, 0.001),
    };
    CpnConfig {
        alpha,
        beta,
        lambda,
        p: 1.0,
        ..CpnConfig::default()
    }
}

/// CPN settings for the MLP experiments.
pub fn mlp_cpn_preset() -> CpnConfig {
    CpnConfig {
        beta: 0.001,
        lambda: 0.1,
        alpha: 0.95,
        p: 1.0,
        ..CpnConfig::default()
    }
}

impl ExperimentConfig {
    /// A toy run with the preset optimizer and, if `cpn`, the preset CPN
    /// settings for that optimizer.
    pub fn toy(kind: OptimizerKind, cpn: bool, output_dir: impl AsRef<Path>) -> Self {
        Self {
            experiment: ExperimentKind::Toy,
            optimizer: OptimizerConfig::toy_defaults(kind),
            cpn: cpn.then(|| toy_cpn_preset(kind)),
            iterations: TOY_ITERATIONS,
            seed: 0,
            start_point: Some(TOY_START.to_vec()),
            mlp: None,
            output_dir: output_dir.as_ref().to_path_buf(),
        }
    }

    /// Mini-batch SGD at lr 0.001 for `epochs` epochs on the reduced network.
    pub fn mlp_train(epochs: u64, output_dir: impl AsRef<Path>) -> Self {
        Self {
            experiment: ExperimentKind::MlpTrain,
            optimizer: OptimizerConfig::Sgd(SgdConfig {
                lr: 0.001,
                ..SgdConfig::default()
            }),
            cpn: Some(mlp_cpn_preset()),
            iterations: epochs,
            seed: 0,
            start_point: None,
            mlp: Some(MlpSettings::default()),
            output_dir: output_dir.as_ref().to_path_buf(),
        }
    }

    /// Full-batch gradient descent on a single-hidden-layer network.
    pub fn mlp_spectrum(max_steps: u64, output_dir: impl AsRef<Path>) -> Self {
        Self {
            experiment: ExperimentKind::MlpSpectrum,
            optimizer: OptimizerConfig::Sgd(SgdConfig {
                lr: 0.5,
                ..SgdConfig::default()
            }),
            cpn: Some(mlp_cpn_preset()),
            iterations: max_steps,
            seed: 0,
            start_point: None,
            mlp: Some(MlpSettings::spectrum_default()),
            output_dir: output_dir.as_ref().to_path_buf(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if let Some(cpn) = &self.cpn {
            cpn.validate()?;
        }
        match self.experiment {
            ExperimentKind::Toy => match &self.start_point {
                Some(p) if p.len() == 2 && p.iter().all(|v| v.is_finite()) => Ok(()),
                Some(p) => Err(Error::Config(format!(
                    "toy start point must be 2 finite coordinates, got {p:?}"
                ))),
                None => Err(Error::Config("toy experiment requires start_point".into())),
            },
            ExperimentKind::MlpTrain | ExperimentKind::MlpSpectrum => {
                let Some(mlp) = &self.mlp else {
                    return Err(Error::Config("MLP experiment requires mlp settings".into()));
                };
                mlp.spec.validate()?;
                if mlp.samples == 0 {
                    return Err(Error::Config("samples must be positive".into()));
                }
                if self.experiment == ExperimentKind::MlpTrain && mlp.batch_size == 0 {
                    return Err(Error::Config("batch_size must be positive".into()));
                }
                if self.experiment == ExperimentKind::MlpSpectrum && mlp.spec.n_layers() != 2 {
                    return Err(Error::Config(format!(
                        "spectrum experiment needs exactly one hidden layer, got sizes {:?}",
                        mlp.spec.layer_sizes
                    )));
                }
                Ok(())
            }
        }
    }
}
