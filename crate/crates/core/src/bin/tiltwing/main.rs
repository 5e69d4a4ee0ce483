mod commands;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tiltwing::config::RunConfig;
use tiltwing::manifest::{Artifact, RunManifest, MANIFEST_VERSION};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "tiltwing", version, about = "Tilt-wing eVTOL takeoff: simulation, references, transformer and guided SAC")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON config (any subset of sections) or a previous run manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. --set sac.batch=128. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=JSON")]
    pub sets: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Start from the full-scale presets instead of the desk ones.
    #[arg(long, global = true)]
    pub full_scale: bool,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Vanilla,
    Guided,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    Takeoff,
    Toy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll a control sequence through the environment and write an episode CSV.
    Simulate(commands::SimulateArgs),
    /// Optimize a minimum-energy reference for one flight condition.
    OptimizeRef(commands::OptimizeArgs),
    /// Optimize references over a Latin hypercube of conditions.
    GenDataset(commands::DatasetArgs),
    /// Train the action-sequence transformer on a dataset.
    TrainTransformer(commands::TransformerArgs),
    /// Train a SAC agent, vanilla or transformer-guided.
    TrainSac(commands::SacArgs),
    /// Compare a trajectory, agent or transformer against reference energies.
    Evaluate(commands::EvaluateArgs),
    /// Render episode CSVs as SVG trajectory and speed plots.
    ExportPlots(commands::PlotArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::OptimizeRef(_) => "optimize-ref",
            Command::GenDataset(_) => "gen-dataset",
            Command::TrainTransformer(_) => "train-transformer",
            Command::TrainSac(_) => "train-sac",
            Command::Evaluate(_) => "evaluate",
            Command::ExportPlots(_) => "export-plots",
        }
    }
}

/// A failed run: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<tiltwing::Error> for Failure {
    fn from(e: tiltwing::Error) -> Self {
        use tiltwing::Error as E;
        let code = match e {
            E::Infeasible(_) => EXIT_INFEASIBLE,
            E::NonFinite(_) | E::NonConvergence { .. } | E::Shape { .. } => EXIT_NUMERICAL,
            E::Contract(_) | E::Format(_) | E::Io(_) | E::Json(_) => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

/// What a command produced; becomes the manifest.
pub struct Outcome {
    pub code: i32,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub manifest_default: PathBuf,
    pub summary: serde_json::Value,
}

fn configure_threads() -> Result<usize, Failure> {
    match std::env::var("EVTOL_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Failure::usage(format!("EVTOL_THREADS must be a positive integer, got '{v}'")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::usage(e.to_string()))?;
        }
        Err(std::env::VarError::NotPresent) => {}
        Err(e) => return Err(Failure::usage(e.to_string())),
    }
    Ok(rayon::current_num_threads())
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let threads = configure_threads()?;
    let base = if cli.global.full_scale { RunConfig::full_scale() } else { RunConfig::desk() };
    let mut cfg = base.merged(cli.global.config.as_deref(), &cli.global.sets)?;
    let seed = cli.global.seed.unwrap_or(cfg.seed);
    cfg = cfg.with_seed(seed);
    let name = cli.command.name();
    let start = Instant::now();
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a, cfg)?,
        Command::OptimizeRef(a) => commands::optimize_ref(a, cfg)?,
        Command::GenDataset(a) => commands::gen_dataset(a, cfg)?,
        Command::TrainTransformer(a) => commands::train_transformer(a, cfg)?,
        Command::TrainSac(a) => commands::train_sac(a, cfg)?,
        Command::Evaluate(a) => commands::evaluate(a, cfg)?,
        Command::ExportPlots(a) => commands::export_plots(a, cfg)?,
    };
    let hash = |ps: &[PathBuf]| ps.iter().map(|p| Artifact::of(p)).collect::<tiltwing::Result<Vec<_>>>();
    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        command: name.to_string(),
        args: std::env::args().collect(),
        config: serde_json::to_value(&outcome.config).map_err(tiltwing::Error::from)?,
        seeds: BTreeMap::from([("seed".to_string(), outcome.config.seed)]),
        threads,
        inputs: hash(&outcome.inputs)?,
        outputs: hash(&outcome.outputs)?,
        wall_clock_s: start.elapsed().as_secs_f64(),
        exit_code: outcome.code,
        summary: outcome.summary.clone(),
    };
    manifest.write(cli.global.manifest.as_deref().unwrap_or(&outcome.manifest_default))?;
    let text = serde_json::to_string_pretty(&outcome.summary).map_err(tiltwing::Error::from)?;
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
