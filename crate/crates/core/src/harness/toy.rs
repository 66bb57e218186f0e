use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::write_csv;
use crate::cpn::CpnState;
use crate::error::{Error, Result};
use crate::optimizers::OptimizerKind;
use crate::params::ParamSet;
use crate::rng::{SeededRng, Stream};
use crate::surfaces::{point_of, Surface, POINT_GROUP};

/// A run has escaped the plateau once `|f| > ESCAPE_LOSS`.
pub const ESCAPE_LOSS: f64 = 1.0;
/// Runs stop once any coordinate exceeds this magnitude or turns non-finite.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub iter: u64,
    pub x: f64,
    pub y: f64,
    pub loss: f64,
    pub penalty: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyOutcome {
    pub optimizer: OptimizerKind,
    pub cpn: bool,
    /// Loss at the last iterate inside the divergence guard.
    pub final_loss: f64,
    pub final_point: [f64; 2],
    pub escape_iter: Option<u64>,
    pub diverged: bool,
    /// Row 0 is the start point; row `k` the iterate after `k` steps.
    pub trajectory: Vec<TrajectoryRecord>,
}

fn out_of_bounds(params: &ParamSet) -> bool {
    !params.all_finite() || params.max_abs() > DIVERGENCE_BOUND
}

/// Runs an optimizer (optionally with CPN) on the monkey saddle.
pub fn run_toy(config: &ExperimentConfig) -> Result<ToyOutcome> {
    if config.experiment != ExperimentKind::Toy {
        return Err(Error::Config(
            "run_toy needs a toy experiment config".into(),
        ));
    }
    config.validate()?;
    let surface = Surface::MonkeySaddle;
    let start = config.start_point.as_deref().expect("validated");
    let mut params = ParamSet::from_point(POINT_GROUP, start);
    let mut optimizer = config.optimizer.build(&params)?;
    let mut cpn = match config.cpn {
        Some(c) => Some(CpnState::init(
            &params,
            c,
            &mut SeededRng::new(config.seed, Stream::EpsNoise),
        )?),
        None => None,
    };

    let mut trajectory = Vec::with_capacity(config.iterations as usize + 1);
    let mut escape_iter = None;
    let mut diverged = false;
    for iter in 0..=config.iterations {
        let loss = surface.eval_params(&params)?;
        let base = surface.grad_params(&params)?;
        let (total, penalty) = match &cpn {
            Some(state) => (state.total_grad(&params, &base)?, state.penalty(&params)?),
            None => (base, 0.0),
        };
        let p = point_of(&params)?;
        trajectory.push(TrajectoryRecord {
            iter,
            x: p[0],
            y: p[1],
            loss,
            penalty,
            grad_norm: total.l2_norm(),
        });
        if escape_iter.is_none() && loss.abs() > ESCAPE_LOSS {
            escape_iter = Some(iter);
        }
        if iter == config.iterations {
            break;
        }

        let before = params.clone();
        optimizer.step(&mut params, &total)?;
        if let Some(state) = cpn.as_mut() {
            state.merge_update(&before)?;
        }
        if out_of_bounds(&params) {
            log::debug!("toy run left the divergence guard after {} steps", iter + 1);
            diverged = true;
            break;
        }
    }

    let last = trajectory.last().expect("at least the start row");
    Ok(ToyOutcome {
        optimizer: config.optimizer.kind(),
        cpn: config.cpn.is_some(),
        final_loss: last.loss,
        final_point: [last.x, last.y],
        escape_iter,
        diverged,
        trajectory,
    })
}

pub fn trajectory_file_name(kind: OptimizerKind, cpn: bool) -> String {
    format!(
        "toy_{}_{}.csv",
        kind.as_str(),
        if cpn { "cpn" } else { "base" }
    )
}

/// Writes the trajectory CSV into `dir` and returns its path.
pub fn write_trajectory(outcome: &ToyOutcome, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(trajectory_file_name(outcome.optimizer, outcome.cpn));
    write_csv(&path, &outcome.trajectory)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub algorithm: String,
    pub cpn: bool,
    pub final_loss: f64,
    pub escape_iter: Option<u64>,
}

impl From<&ToyOutcome> for Table2Row {
    fn from(o: &ToyOutcome) -> Self {
        Self {
            algorithm: o.optimizer.as_str().to_string(),
            cpn: o.cpn,
            final_loss: o.final_loss,
            escape_iter: o.escape_iter,
        }
    }
}

/// All ten toy cells (five optimizers, with and without CPN) at the preset
/// settings, `iterations` steps each.
pub fn run_table2(iterations: u64, seed: u64, output_dir: &Path) -> Result<Vec<ToyOutcome>> {
    let mut outcomes = Vec::with_capacity(10);
    for kind in OptimizerKind::ALL {
        for cpn in [false, true] {
            let mut config = ExperimentConfig::toy(kind, cpn, output_dir);
            config.iterations = iterations;
            config.seed = seed;
            outcomes.push(run_toy(&config)?);
        }
    }
    Ok(outcomes)
}

pub fn write_table2(outcomes: &[ToyOutcome], dir: &Path) -> Result<PathBuf> {
    let path = dir.join("table2.csv");
    let rows: Vec<Table2Row> = outcomes.iter().map(Table2Row::from).collect();
    write_csv(&path, &rows)?;
    Ok(path)
}
