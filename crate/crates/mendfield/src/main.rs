//! Command-line driver for the staged repair pipeline.
//!
//! Every subcommand reads one TOML config and one output directory; stages
//! communicate only through files in that directory, so they can run as
//! separate processes (or machines) in sequence.

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

use mendfield::pipeline::{
    cmd_eval, cmd_fracture, cmd_infer, cmd_sample, cmd_train, PipelineConfig,
};
use mendfield::{Error, Result};

#[derive(Parser)]
#[command(name = "mendfield", version, about = "Repairs fractured 3D shapes with learned implicit fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Pipeline configuration (TOML); built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory shared by all stages.
    #[arg(long)]
    out: PathBuf,
    /// Overrides this stage's seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 forces the bit-reproducible mode.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the stage's grid resolution (fracture meshing or
    /// inference-time extraction).
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generates complete shapes and fractures them into dataset tuples.
    Fracture(StageArgs),
    /// Draws and labels probe points for every shape in the manifest.
    Sample(StageArgs),
    /// Fits the autodecoder to the train split.
    Train(StageArgs),
    /// Recovers codes for the test split and extracts restoration meshes.
    Infer(StageArgs),
    /// Scores the restorations and writes the metric report.
    Eval(StageArgs),
}

impl Command {
    fn args(&self) -> &StageArgs {
        match self {
            Command::Fracture(a)
            | Command::Sample(a)
            | Command::Train(a)
            | Command::Infer(a)
            | Command::Eval(a) => a,
        }
    }
}

fn load_config(command: &Command) -> Result<PipelineConfig> {
    let args = command.args();
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        match command {
            Command::Fracture(_) => {
                config.dataset.seed = seed;
                config.dataset.fracture.seed = seed;
            }
            Command::Sample(_) => config.sampling.seed = seed,
            Command::Train(_) => config.train.seed = seed,
            Command::Infer(_) => config.infer.seed = seed,
            Command::Eval(_) => config.eval.seed = seed,
        }
    }
    if let Some(resolution) = args.resolution {
        match command {
            Command::Fracture(_) => config.dataset.fracture_params.mesh_resolution = resolution,
            Command::Infer(_) => config.infer.resolution = resolution,
            _ => eprintln!("note: --resolution has no effect on this stage"),
        }
    }
    Ok(config)
}

fn run(command: Command) -> Result<()> {
    let config = load_config(&command)?;
    let args = command.args();
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool setup failed: {e}")))?;
    }
    let out = args.out.clone();

    match command {
        Command::Fracture(_) => {
            let manifest = cmd_fracture(&config, &out)?;
            println!(
                "fracture: accepted {} shapes, rejected {}",
                manifest.shapes.len(),
                manifest.rejected.len()
            );
            for r in &manifest.rejected {
                eprintln!("rejected {}: {}", r.name, r.reason);
            }
            if manifest.shapes.is_empty() {
                eprintln!("warning: no shape passed the retention test; later stages have nothing to do");
            }
        }
        Command::Sample(_) => {
            let summary = cmd_sample(&config, &out)?;
            println!(
                "sample: labeled {} points for each of {} shapes",
                summary.points_per_shape, summary.shapes
            );
        }
        Command::Train(_) => {
            let outcome = cmd_train(&config, &out)?;
            match outcome.log.last() {
                Some(last) => println!(
                    "train: {} epochs, final L_CB {:.5}, L_F {:.5}, L_R {:.5}",
                    outcome.log.len(),
                    last.l_cb,
                    last.l_f,
                    last.l_r
                ),
                None => println!("train: 0 epochs"),
            }
        }
        Command::Infer(_) => {
            let summary = cmd_infer(&config, &out)?;
            let empty = summary.shapes.iter().filter(|s| s.empty).count();
            println!(
                "infer: restored {} shapes ({} empty)",
                summary.shapes.len(),
                empty
            );
        }
        Command::Eval(_) => {
            let report = cmd_eval(&config, &out)?;
            print!("{}", report.to_csv());
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout and exit 0; usage errors exit 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}
