//! Experiment configuration, runners and CSV output.

pub mod config;
pub mod mlp_runs;
pub mod toy;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{
    mlp_cpn_preset, toy_cpn_preset, Dataset, ExperimentConfig, ExperimentKind, MlpSettings,
    TOY_ITERATIONS, TOY_START,
};
pub use mlp_runs::{
    run_mlp_spectrum, run_mlp_train, write_spectrum_outputs, write_train_outputs, DataOrigin,
    SpectrumOutcome, TrainOutcome,
};
pub use toy::{run_table2, run_toy, write_table2, write_trajectory, ToyOutcome, TrajectoryRecord};

/// Writes `rows` as CSV with a header line derived from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv serialization failed: {other:?}")),
    }
}

/// Runs whatever `config` describes and writes its CSVs into
/// `config.output_dir`, returning the written paths.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let dir = config.output_dir.as_path();
    match config.experiment {
        ExperimentKind::Toy => {
            let out = run_toy(config)?;
            Ok(vec![write_trajectory(&out, dir)?])
        }
        ExperimentKind::MlpTrain => write_train_outputs(&run_mlp_train(config)?, dir),
        ExperimentKind::MlpSpectrum => write_spectrum_outputs(&run_mlp_spectrum(config)?, dir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::OptimizerKind;

    #[test]
    fn csv_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig::toy(OptimizerKind::Adam, true, dir.path());
        let paths = run_experiment(&config).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,x,y,loss,penalty,grad_norm");
        assert_eq!(lines.count(), 121);
    }

    #[test]
    fn table2_csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let outcomes = run_table2(5, 0, dir.path()).unwrap();
        assert_eq!(outcomes.len(), 10);
        let path = write_table2(&outcomes, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "algorithm,cpn,final_loss,escape_iter"
        );
        assert_eq!(text.lines().count(), 11);
    }
}
