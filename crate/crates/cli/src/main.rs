use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sketchlord_cli::{
    run_experiment, run_single, write_bounds, write_summary, CliError, Experiment, ExperimentConfig, RawConfig,
    Status, WORKERS_ENV,
};

#[derive(Parser)]
#[command(name = "sketchlord", version, about = "Sketched low-rank plus diagonal experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic grid: matrix families x diagonal ratios x samples.
    Grid(Common),
    /// The 11ᵀ + I toy operator across measurement budgets.
    Toy(Common),
    /// Solver hyperparameter sweep on a fixed matrix family.
    Stability(Common),
    /// Best-case toy residuals for k = 1..=k_max.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n")]
        n: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// One run, with the solver trace written when `--trace` is given.
    Single {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Result CSV; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(short, long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Master seed, overriding the configuration.
    #[arg(short, long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::empty(),
        };
        if self.seed.is_some() {
            raw.master_seed = self.seed;
        }
        if self.output.is_some() {
            raw.output = self.output.clone();
        }
        ExperimentConfig::resolve(raw, experiment)
    }

    fn workers(&self) -> usize {
        self.workers
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn summary_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map_or("results".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.summary.csv"))
}

fn sweep(common: &Common, experiment: Experiment) -> Result<(), CliError> {
    let cfg = common.resolve(experiment)?;
    let out = open_output(cfg.output.as_deref())?;
    let rows = run_experiment(&cfg, common.workers(), out)?;
    if let Some(path) = &cfg.output {
        write_summary(&rows, File::create(summary_path(path))?)?;
    }
    let failed = rows.iter().filter(|r| r.status != Status::Ok).count();
    log::info!("{} rows written, {failed} not ok", rows.len());
    Ok(())
}

fn single(common: &Common, trace: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = common.resolve(Experiment::Single)?;
    if trace.is_some() {
        cfg.trace = trace;
    }
    let result = run_single(&cfg);
    let mut w = sketchlord_cli::output::csv_writer(open_output(cfg.output.as_deref())?);
    w.serialize(&result.row)?;
    w.flush()?;
    if let (Some(path), Some(trace)) = (&cfg.trace, &result.trace) {
        trace.write_csv(BufWriter::new(File::create(path)?))?;
    }
    match result.row.status {
        Status::Ok => Ok(()),
        status => Err(CliError::Runtime(format!(
            "{} run finished with status {status:?}",
            result.row.method
        ))),
    }
}

fn bounds(common: &Common, n: Option<usize>, k_max: Option<usize>) -> Result<(), CliError> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::empty(),
    };
    raw.n = n.or(raw.n);
    raw.k_max = k_max.or(raw.k_max);
    raw.output = common.output.clone().or(raw.output);
    let cfg = ExperimentConfig::resolve(raw, Experiment::Bounds)?;
    write_bounds(cfg.n, cfg.k_max, open_output(cfg.output.as_deref())?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Grid(c) => sweep(c, Experiment::Grid),
        Command::Toy(c) => sweep(c, Experiment::Toy),
        Command::Stability(c) => sweep(c, Experiment::Stability),
        Command::Bounds { common, n, k_max } => bounds(common, *n, *k_max),
        Command::Single { common, trace } => single(common, trace.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
