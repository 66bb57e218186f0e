//! Charged point normalization (CPN) with reference first-order optimizers,
//! analytic saddle surfaces, a small dense network and Hessian spectrum
//! tools.
//!
//! CPN adds a decaying repulsion term `λ·exp(-βt) / Σ‖W_i − Ŵ_i‖_p` to any
//! loss, where `Ŵ` is an exponentially averaged trailing copy of the
//! parameters. Following its gradient pushes the iterate away from where it
//! has recently been, which helps first-order methods leave plateaus around
//! saddle points.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cpn;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mlp;
pub mod optimizers;
pub mod params;
pub mod rng;
pub mod surfaces;

pub use analysis::{CriticalPoint, SpectrumReport};
pub use cpn::{charged_step, CpnConfig, CpnState};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use optimizers::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{axpy, gaussian_noise_like, group_pnorm, ParamGroup, ParamSet};
pub use rng::{SeededRng, Stream};
pub use surfaces::Surface;
