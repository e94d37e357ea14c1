//! `envid` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use envid::degrade::CodecBridge;
use envid::pipeline::{
    evaluate_all, generate_dataset, ingest_corpus, simulate_rooms, summarize_reports, train,
    Dataset, EvalConfig, GenerateConfig, PipelineError, PoolKind, Protocol, SimulateConfig,
    TrainConfig, TrainedModel,
};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "envid",
    version,
    about = "Few-shot acoustic environment identification"
)]
struct Cli {
    /// Worker threads for generation and embedding.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample shoebox rooms and render their grid AIRs as WAV files.
    SimulateRooms {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a dataset manifest and its feature store.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        codec_bridge: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import a directory of WAV files as a speech, AIR or noise pool.
    Ingest {
        dir: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// CSV with columns file,room,volume,rt60 (AIR pools).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Episodic training with early stopping.
    Train {
        /// Dataset directory or manifest file.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run evaluation protocols on the test split.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Training run directory.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, required = true, num_args = 1..)]
        protocol: Vec<ProtocolArg>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print and save a summary of the reports in a directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Speech,
    Air,
    Noise,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Closed,
    Open,
    Ksweep,
    Positions,
    Regress,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Closed => Protocol::Closed,
            ProtocolArg::Open => Protocol::Open,
            ProtocolArg::Ksweep => Protocol::Ksweep,
            ProtocolArg::Positions => Protocol::Positions,
            ProtocolArg::Regress => Protocol::Regress,
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, PipelineError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::SimulateRooms { config, seed, out } => {
            let mut config: SimulateConfig = read_config(config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let rooms = simulate_rooms(&config, &out, cli.jobs)?;
            println!("rendered {} rooms to {}", rooms.len(), out.display());
        }
        Command::Generate {
            config,
            seed,
            codec_bridge,
            out,
        } => {
            let mut config: GenerateConfig = read_config(config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let bridge = codec_bridge
                .as_deref()
                .map(CodecBridge::load)
                .transpose()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            let ds = generate_dataset(&config, &out, bridge.as_ref(), cli.jobs)?;
            println!(
                "{} records, {} classes in {}",
                ds.manifest.records.len(),
                ds.manifest.classes.len(),
                out.display()
            );
        }
        Command::Ingest {
            dir,
            kind,
            labels,
            out,
        } => {
            let kind = match kind {
                Kind::Speech => PoolKind::Speech,
                Kind::Air => PoolKind::Air,
                Kind::Noise => PoolKind::Noise,
            };
            let index = ingest_corpus(&dir, kind, &out, labels.as_deref())?;
            println!("{} entries in {}", index.entries.len(), out.display());
        }
        Command::Train {
            manifest,
            config,
            seed,
            out,
        } => {
            let mut config: TrainConfig = read_config(config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let ds = Dataset::open(&manifest)?;
            let model = train(&ds, &config, &out)?;
            println!(
                "best validation accuracy {:.4} at epoch {} of {}",
                model.log.best_val_accuracy,
                model.log.best_epoch,
                model.log.epochs.len()
            );
        }
        Command::Evaluate {
            manifest,
            model,
            protocol,
            config,
            seed,
            out,
        } => {
            let mut config: EvalConfig = read_config(config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let ds = Dataset::open(&manifest)?;
            let model = TrainedModel::load(&model)?;
            let protocols: Vec<Protocol> = protocol.into_iter().map(Protocol::from).collect();
            evaluate_all(&ds, &model, &protocols, &config, &out)?;
            print!("{}", summarize_reports(&out)?);
        }
        Command::Report { out } => {
            let text = summarize_reports(&out)?;
            fs::write(out.join("summary.txt"), &text)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon_threads(cli.jobs) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Sizes the global pool used for embedding.
fn rayon_threads(jobs: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build_global()
        .map_err(|e| e.to_string())
}
