//! Command-line front end for the multipath imaging pipeline.
//!
//! Every subcommand takes a scenario file (`--config`) and most bind an
//! output directory (`--out`) holding the stage files and manifest.
//! Exit codes distinguish failure classes so scripts can branch:
//!
//! * 0: success
//! * 1: filesystem failure
//! * 2: bad scenario or command line
//! * 3: missing or mismatched stage input (wrong order, stale directory)
//! * 4: numerical or geometric failure inside a stage

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mpi_isr_core::config::ScenarioConfig;
use mpi_isr_core::pipeline::{Pipeline, Stage};
use mpi_isr_core::Error;

#[derive(Parser)]
#[command(
    name = "mpi-isr",
    version,
    about = "Multipath-exploiting microwave imaging: simulate, invert, image, compare"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage-running subcommand.
#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for stage files and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Skip scenario-hash checks and take over a stale directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print its hash.
    Validate {
        /// Scenario file (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Synthesize the measurement set.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Override the simulation image-expansion order.
        #[arg(long)]
        order: Option<usize>,
        /// Override the additive-noise SNR (dB).
        #[arg(long)]
        snr_db: Option<f64>,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Separate per-copy spectra from the measurements.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Override the solver image-expansion order.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Back-propagate the spectra into the combined reconstruction.
    Image {
        #[command(flatten)]
        common: Common,
    },
    /// Run the plain and reflection-aware back-projection baselines.
    Bpa {
        #[command(flatten)]
        common: Common,
    },
    /// Extract metrics from the reconstructions.
    Metrics {
        #[command(flatten)]
        common: Common,
    },
    /// Run several stages in order (default: all).
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Comma-separated stages (simulate,invert,image,bpa,metrics).
        #[arg(long)]
        stages: Option<String>,
        /// Override both the simulation and solver expansion orders.
        #[arg(long)]
        order: Option<usize>,
        /// Override the additive-noise SNR (dB).
        #[arg(long)]
        snr_db: Option<f64>,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_json(&text)
}

fn parse_stages(text: Option<&str>) -> Result<Vec<Stage>, Error> {
    match text {
        None => Ok(Stage::ALL.to_vec()),
        Some(list) => list.split(',').map(Stage::from_str).collect(),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            let scene = cfg.scene()?;
            println!("scenario ok: {}", cfg.hash());
            println!(
                "  {} source(s), {} reflector(s), {} frequencies, {} component(s)",
                scene.sources.len(),
                scene.planes.len(),
                cfg.frequencies_hz.len(),
                cfg.recorded_components.len()
            );
        }
        Command::Simulate { common, order, snr_db, seed } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(o) = order {
                cfg.simulation.max_image_order = o;
            }
            if let Some(s) = snr_db {
                cfg.simulation.snr_db = Some(s);
            }
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            let pipe = Pipeline::new(cfg, &common.out, common.force)?;
            pipe.simulate()?;
            println!("simulate: done");
        }
        Command::Invert { common, order } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(o) = order {
                cfg.solver.max_image_order = o;
            }
            let pipe = Pipeline::new(cfg, &common.out, common.force)?;
            pipe.invert()?;
            println!("invert: done");
        }
        Command::Image { common } => {
            let pipe = Pipeline::new(load_config(&common.config)?, &common.out, common.force)?;
            pipe.image()?;
            println!("image: done");
        }
        Command::Bpa { common } => {
            let pipe = Pipeline::new(load_config(&common.config)?, &common.out, common.force)?;
            pipe.bpa()?;
            println!("bpa: done");
        }
        Command::Metrics { common } => {
            let pipe = Pipeline::new(load_config(&common.config)?, &common.out, common.force)?;
            pipe.metrics()?;
            println!("metrics: done");
        }
        Command::Pipeline { common, stages, order, snr_db, seed } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(o) = order {
                cfg.simulation.max_image_order = o;
                cfg.solver.max_image_order = o;
            }
            if let Some(s) = snr_db {
                cfg.simulation.snr_db = Some(s);
            }
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            let stages = parse_stages(stages.as_deref())?;
            let pipe = Pipeline::new(cfg, &common.out, common.force)?;
            for stage in Stage::ALL {
                if stages.contains(&stage) {
                    pipe.run(&[stage])?;
                    println!("{}: done", stage.name());
                }
            }
        }
    }
    Ok(())
}

/// Exit code for a failure class; scripts branch on these.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        Error::Config(_) => 2,
        Error::StageInput(_) => 3,
        Error::Domain(_)
        | Error::Singularity(_)
        | Error::Geometry(_)
        | Error::GridMismatch(_)
        | Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
