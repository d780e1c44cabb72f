//! File formats, configuration and the `lpp` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod output;
pub mod raster_io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{check_raster_format, Artifact, Format};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::export::Scaling;
use crate::output::{input_record, write_atomic, Manifest, OutputRecord, Outputs, Versions};

#[derive(Debug, Parser)]
#[command(name = "lpp", version, about = "Laser phase plate simulation and fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScalingArg {
    Minmax,
    Percentile,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat JSON run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "raster")]
    format: Format,
    /// Gray-level mapping for png/pgm output.
    #[arg(long, value_enum, default_value = "percentile")]
    scaling: ScalingArg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a detector image of the standing wave.
    SimulateRonchigram(Common),
    /// Simulate a weak-phase micrograph of a random object.
    SimulateImage(Common),
    /// Compute the CTF map and its angular RMS profile.
    CtfMap(Common),
    /// Angular RMS profile of a CTF map (computed from the configuration without --input).
    RmsProfile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit peak phase, NA and coincidence loss to a Ronchigram.
    FitRonchigram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Raster whose nonzero pixels are known to be dead.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Fit defocus, Cs and the constant phase to the Thon rings of a micrograph.
    FitCtf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Peak-to-peak phase and period of a beam-position scan.
    ScanAnalyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SimulateRonchigram(_) => "simulate-ronchigram",
            Command::SimulateImage(_) => "simulate-image",
            Command::CtfMap(_) => "ctf-map",
            Command::RmsProfile { .. } => "rms-profile",
            Command::FitRonchigram { .. } => "fit-ronchigram",
            Command::FitCtf { .. } => "fit-ctf",
            Command::ScanAnalyze { .. } => "scan-analyze",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::SimulateRonchigram(c) | Command::SimulateImage(c) | Command::CtfMap(c) => c,
            Command::RmsProfile { common, .. }
            | Command::FitRonchigram { common, .. }
            | Command::FitCtf { common, .. }
            | Command::ScanAnalyze { common, .. } => common,
        }
    }

    fn inputs(&self) -> Vec<&Path> {
        match self {
            Command::RmsProfile { input, .. } => input.iter().map(PathBuf::as_path).collect(),
            Command::FitRonchigram { input, mask, .. } => {
                std::iter::once(input.as_path()).chain(mask.as_deref()).collect()
            }
            Command::FitCtf { input, .. } | Command::ScanAnalyze { input, .. } => {
                vec![input.as_path()]
            }
            _ => Vec::new(),
        }
    }
}

/// Caps rayon's pool from `LPP_THREADS` (0 or unset: one thread per core).
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("LPP_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("LPP_THREADS must be a non-negative integer, got {value:?}")))?;
    // A pool may already exist when several commands run in one process.
    if rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_err() {
        log::debug!("thread pool already initialized; LPP_THREADS ignored");
    }
    Ok(())
}

fn execute(command: &Command) -> Result<()> {
    let common = command.common();
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    configure_threads()?;
    for input in command.inputs() {
        if !input.is_file() {
            return Err(CliError::Config(format!("input {} does not exist", input.display())));
        }
    }
    let scaling = match common.scaling {
        ScalingArg::Minmax => Scaling::MinMax,
        ScalingArg::Percentile => Scaling::Percentile,
    };
    if matches!(command, Command::SimulateRonchigram(_) | Command::SimulateImage(_) | Command::CtfMap(_)) {
        check_raster_format(common.format)?;
    }

    let mut inputs: Vec<OutputRecord> = command.inputs().into_iter().map(input_record).collect::<Result<_>>()?;
    let artifacts: Vec<Artifact> = match command {
        Command::SimulateRonchigram(_) => commands::simulate_ronchigram(&cfg, common.format, scaling)?,
        Command::SimulateImage(_) => commands::simulate_image(&cfg, common.format, scaling)?,
        Command::CtfMap(_) => commands::ctf_map_command(&cfg, common.format, scaling)?,
        Command::RmsProfile { input, .. } => commands::rms_profile(&cfg, input.as_deref())?,
        Command::FitRonchigram { input, mask, .. } => commands::fit_ronchigram_command(&cfg, input, mask.as_deref())?,
        Command::FitCtf { input, .. } => commands::fit_ctf_command(&cfg, input)?,
        Command::ScanAnalyze { input, .. } => {
            let (artifacts, images) = commands::scan_analyze(&cfg, input)?;
            for image in images {
                inputs.push(input_record(&image)?);
            }
            artifacts
        }
    };

    std::fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
    let mut outputs = Outputs::new(&common.out);
    for artifact in &artifacts {
        let path = outputs.write(&artifact.name, &artifact.bytes)?;
        println!("{}", path.display());
    }
    let manifest = Manifest {
        command: command.name(),
        config: &cfg,
        seed: cfg.seed,
        inputs,
        versions: Versions::default(),
        outputs: outputs.records(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable manifest");
    bytes.push(b'\n');
    write_atomic(&outputs.path("manifest.json"), &bytes)
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code: 0 on success, 2 for usage and validation errors, 1 for
/// failures during computation.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
