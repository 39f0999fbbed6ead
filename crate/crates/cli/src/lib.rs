//! Experiment runner for the `occlink` rolling-shutter link toolkit.
//!
//! Subcommands `simulate`, `sweep-ber`, `decode-image` and `offset-demo` read a
//! JSON [`config::RunConfig`], apply flag overrides, and write CSV, JSON, PGM
//! and bit files into the output directory. Exit codes are listed in
//! [`error`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod trial;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Overrides, RunConfig};
use error::{CliError, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "occlink", version, about = "Rolling-shutter OCC link simulator")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// JSON run configuration; defaults apply for missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one frame through the link and decode it.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo BER over offsets and SNRs.
    SweepBer {
        #[command(flatten)]
        common: Common,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
        /// Trials per grid point.
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated offsets (fractions of T_s or "random").
        #[arg(long, value_delimiter = ',', value_parser = config::OffsetSpec::parse)]
        offsets: Option<Vec<config::OffsetSpec>>,
        /// Comma-separated SNRs in dB ("none" for noiseless).
        #[arg(long, value_delimiter = ',')]
        snrs: Option<Vec<config::Nullable<f64>>>,
    },
    /// Decode the payload from a PGM stripe image.
    DecodeImage {
        /// Image to decode.
        image: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Analytic against estimated offset taps.
    OffsetDemo {
        #[command(flatten)]
        common: Common,
        /// Comma-separated offsets as fractions of T_s.
        #[arg(long, value_delimiter = ',')]
        offsets: Option<Vec<f64>>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Simulate { common }
            | Self::SweepBer { common, .. }
            | Self::DecodeImage { common, .. }
            | Self::OffsetDemo { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Simulate { .. } => "simulate",
            Self::SweepBer { .. } => "sweep-ber",
            Self::DecodeImage { .. } => "decode-image",
            Self::OffsetDemo { .. } => "offset-demo",
        }
    }
}

/// Load the config file (or defaults), apply overrides and validate.
pub fn resolve_config(cmd: &Command) -> Result<RunConfig, CliError> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&common.overrides);
    match cmd {
        Command::SweepBer { trials, offsets, snrs, .. } => {
            if let Some(t) = trials {
                cfg.sweep.trials = *t;
            }
            if let Some(o) = offsets {
                cfg.sweep.offsets = o.clone();
            }
            if let Some(s) = snrs {
                cfg.sweep.snr_db = s.iter().map(|v| v.0).collect();
            }
        }
        Command::OffsetDemo { offsets: Some(o), .. } => cfg.demo_offsets = o.clone(),
        _ => {}
    }
    cfg.validate()?;
    if !cfg.decodes() && !matches!(cmd, Command::Simulate { .. }) {
        return Err(CliError::Config {
            field: "explicit_symbols".into(),
            message: format!("{} needs a preamble + payload frame; remove explicit_symbols", cmd.name()),
        });
    }
    Ok(cfg)
}

fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Option<serde_json::Value>, CliError> {
    match cmd {
        Command::Simulate { .. } => commands::simulate(cfg).map(Some),
        Command::SweepBer { threads, .. } => {
            let n = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            commands::sweep_ber(cfg, n).map(|_| None)
        }
        Command::DecodeImage { image, .. } => commands::decode_image(cfg, image).map(Some),
        Command::OffsetDemo { .. } => commands::offset_demo(cfg).map(|_| None),
    }
}

fn write_failure(dir: &Path, command: &str, err: &CliError, cfg: Option<&RunConfig>) {
    let report = json!({
        "status": "error",
        "exit_code": err.exit_code(),
        "command": command,
        "reason": err.reason(),
        "config": cfg,
    });
    if commands::ensure_dir(dir).is_ok() {
        if let Err(e) = output::write_json(&dir.join("report.json"), &report) {
            log::error!("could not write the failure report: {e}");
        }
    }
}

fn init_logger(verbose: bool) {
    let level = if verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    // Builder::new() reads no environment variables
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_logger(cli.verbose);
    let cmd = &cli.command;
    let cfg = match resolve_config(cmd) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(dir) = &cmd.common().overrides.out {
                write_failure(dir, cmd.name(), &e, None);
            }
            return e.exit_code();
        }
    };
    let result = execute(cmd, &cfg).and_then(|report| match report {
        Some(r) => output::write_json(&cfg.out_dir.join("report.json"), &r),
        None => Ok(()),
    });
    match result {
        Ok(()) => {
            log::info!("{} finished; outputs in {}", cmd.name(), cfg.out_dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            write_failure(&cfg.out_dir, cmd.name(), &e, Some(&cfg));
            e.exit_code()
        }
    }
}
