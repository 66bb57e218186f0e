use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpn_core::harness::{
    self, mlp_cpn_preset, toy, Dataset, ExperimentConfig, MlpSettings, TOY_ITERATIONS,
};
use cpn_core::mlp::MlpSpec;
use cpn_core::{CpnConfig, Error, OptimizerKind, Result};

#[derive(Parser)]
#[command(
    name = "cpn",
    version,
    about = "Charged point normalization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the monkey saddle from a point near its origin.
    Toy(ToyArgs),
    /// Run all five optimizers with and without CPN and print a comparison.
    Table2(Table2Args),
    /// Mini-batch training of a dense network, with and without CPN.
    MlpTrain(MlpTrainArgs),
    /// Full-batch training of a one-hidden-layer network, then per-group
    /// Hessian spectra at the final point.
    MlpSpectrum(MlpSpectrumArgs),
    /// Run an experiment described by a JSON config file.
    Run(RunArgs),
}

#[derive(Args)]
struct CpnArgs {
    /// Enable CPN (toy defaults depend on the optimizer).
    #[arg(long)]
    cpn: bool,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    eps_sigma: Option<f64>,
}

impl CpnArgs {
    fn apply(&self, mut base: CpnConfig) -> CpnConfig {
        base.beta = self.beta.unwrap_or(base.beta);
        base.lambda = self.lambda.unwrap_or(base.lambda);
        base.alpha = self.alpha.unwrap_or(base.alpha);
        base.p = self.p.unwrap_or(base.p);
        base.eps_sigma = self.eps_sigma.unwrap_or(base.eps_sigma);
        base
    }
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    optimizer: OptimizerKind,
    #[command(flatten)]
    cpn: CpnArgs,
    /// Override the optimizer's learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = TOY_ITERATIONS)]
    iters: u64,
    /// Start point as X,Y.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: Option<Point>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Table2Args {
    #[arg(long, default_value_t = TOY_ITERATIONS)]
    iters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Directory with the MNIST IDX files (default: $CPN_DATA_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Use synthetic Gaussian clusters instead of MNIST.
    #[arg(long)]
    synthetic: bool,
    /// Fail instead of falling back to synthetic data when MNIST is missing.
    #[arg(long)]
    no_fallback: bool,
    #[arg(long)]
    samples: Option<usize>,
}

impl DataArgs {
    fn apply(&self, settings: &mut MlpSettings) {
        if self.synthetic {
            settings.dataset = Dataset::Synthetic;
        }
        settings.data_dir = self.data_dir.clone();
        settings.synthetic_fallback = !self.no_fallback;
        if let Some(n) = self.samples {
            settings.samples = n;
        }
    }
}

#[derive(Args)]
struct MlpTrainArgs {
    #[arg(long, default_value_t = 10)]
    epochs: u64,
    /// Use the 784→512→512→10 network on raw 28×28 inputs.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Train only the baseline.
    #[arg(long)]
    no_cpn: bool,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MlpSpectrumArgs {
    /// Gradient-descent step cap.
    #[arg(long, default_value_t = 2000)]
    max_steps: u64,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Point)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn toy(args: ToyArgs) -> Result<()> {
    let mut config = ExperimentConfig::toy(args.optimizer, args.cpn.cpn, &args.out);
    config.cpn = config.cpn.map(|c| args.cpn.apply(c));
    if let Some(lr) = args.lr {
        config.optimizer = config.optimizer.with_lr(lr);
    }
    config.iterations = args.iters;
    config.seed = args.seed;
    if let Some(Point(start)) = args.start {
        config.start_point = Some(start);
    }
    config.validate()?;
    std::fs::create_dir_all(&args.out)?;
    let outcome = toy::run_toy(&config)?;
    let path = toy::write_trajectory(&outcome, &args.out)?;
    println!(
        "{} cpn={} final_loss={:e} escape_iter={} diverged={}",
        outcome.optimizer.label(),
        outcome.cpn,
        outcome.final_loss,
        outcome
            .escape_iter
            .map_or("-".to_string(), |i| i.to_string()),
        outcome.diverged
    );
    print_paths(&[path]);
    Ok(())
}

fn table2(args: Table2Args) -> Result<()> {
    if args.iters == 0 {
        return Err(Error::Config("iters must be positive".into()));
    }
    std::fs::create_dir_all(&args.out)?;
    let outcomes = toy::run_table2(args.iters, args.seed, &args.out)?;
    let mut paths = Vec::new();
    for o in &outcomes {
        paths.push(toy::write_trajectory(o, &args.out)?);
    }
    paths.push(toy::write_table2(&outcomes, &args.out)?);

    println!(
        "{:<16} {:>16} {:>16} {:>8}",
        "algorithm", "without CPN", "with CPN", "escape"
    );
    for pair in outcomes.chunks(2) {
        let (base, cpn) = (&pair[0], &pair[1]);
        println!(
            "{:<16} {:>16.6e} {:>16.6e} {:>8}",
            base.optimizer.label(),
            base.final_loss,
            cpn.final_loss,
            cpn.escape_iter.map_or("-".to_string(), |i| i.to_string())
        );
    }
    print_paths(&paths);
    Ok(())
}

fn mlp_train(args: MlpTrainArgs) -> Result<()> {
    let mut config = ExperimentConfig::mlp_train(args.epochs, &args.out);
    let settings = config.mlp.as_mut().expect("preset has settings");
    if args.full {
        *settings = MlpSettings::full_scale();
    }
    args.data.apply(settings);
    if let Some(b) = args.batch_size {
        settings.batch_size = b;
    }
    if let Some(lr) = args.lr {
        config.optimizer = config.optimizer.with_lr(lr);
    }
    config.cpn = (!args.no_cpn).then(|| {
        let mut c = mlp_cpn_preset();
        c.beta = args.beta.unwrap_or(c.beta);
        c.lambda = args.lambda.unwrap_or(c.lambda);
        c.alpha = args.alpha.unwrap_or(c.alpha);
        c
    });
    config.seed = args.seed;
    config.validate()?;
    std::fs::create_dir_all(&args.out)?;
    let outcome = harness::run_mlp_train(&config)?;
    for run in std::iter::once(&outcome.baseline).chain(outcome.charged.as_ref()) {
        let last = run.curve.last().expect("epoch 0 row");
        println!(
            "cpn={} epochs={} initial_loss={:.6} final_loss={:.6}",
            run.cpn, last.epoch, run.curve[0].loss, last.loss
        );
    }
    print_paths(&harness::write_train_outputs(&outcome, &args.out)?);
    Ok(())
}

fn mlp_spectrum(args: MlpSpectrumArgs) -> Result<()> {
    let mut config = ExperimentConfig::mlp_spectrum(args.max_steps, &args.out);
    let settings = config.mlp.as_mut().expect("preset has settings");
    args.data.apply(settings);
    if let Some(h) = args.hidden {
        let spec = &settings.spec;
        settings.spec = MlpSpec {
            layer_sizes: vec![spec.input_dim(), h, spec.output_dim()],
            ..spec.clone()
        };
    }
    if let Some(lr) = args.lr {
        config.optimizer = config.optimizer.with_lr(lr);
    }
    config.seed = args.seed;
    config.validate()?;
    std::fs::create_dir_all(&args.out)?;
    let outcome = harness::run_mlp_spectrum(&config)?;
    for run in std::iter::once(&outcome.baseline).chain(outcome.charged.as_ref()) {
        println!(
            "cpn={} steps={} converged={} final_loss={:.6} grad_norm={:e}",
            run.cpn, run.steps, run.converged, run.final_loss, run.final_grad_norm
        );
        for g in &run.groups {
            let r = &g.report;
            println!(
                "  {:<3} n={:<5} neg={:<5} zero={:<5} pos={:<5} range=[{:.3e}, {:.3e}] {}",
                g.group,
                r.eigenvalues.len(),
                r.n_negative,
                r.n_near_zero,
                r.n_positive,
                r.lambda_min,
                r.lambda_max,
                r.classification.as_str()
            );
        }
    }
    print_paths(&harness::write_spectrum_outputs(&outcome, &args.out)?);
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_json_file(&args.config)?;
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    print_paths(&harness::run_experiment(&config)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Toy(a) => toy(a),
        Command::Table2(a) => table2(a),
        Command::MlpTrain(a) => mlp_train(a),
        Command::MlpSpectrum(a) => mlp_spectrum(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
