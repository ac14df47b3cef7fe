//! Command-line front end for the zoo guide: pack validation, calibration
//! fitting, headless tours and the HTTP/stream service.

pub mod commands;
pub mod server;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status of a command: 0 ok, 1 invalid input, 2 I/O failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Invalid = 1,
    Io = 2,
}

impl From<Status> for ExitCode {
    fn from(status: Status) -> Self {
        ExitCode::from(status as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "zooguide", version, about = "GPS zoo tour guide")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a content pack and report every problem found.
    Validate { dir: PathBuf },
    /// Fit map calibration coefficients from a control point file.
    Calibrate {
        file: PathBuf,
        /// Also write the manifest calibration block here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a walk script through a session and write its event log.
    Tour {
        dir: PathBuf,
        #[arg(long)]
        walk: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the walk script's noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the pack over HTTP with a live session stream.
    Serve {
        dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Scripted walk replayed at the start of every session.
        #[arg(long)]
        walk: Option<PathBuf>,
        /// Seed for the walk noise and the steered walker.
        #[arg(long)]
        seed: Option<u64>,
        /// Clock speed multiplier; 1 is real time.
        #[arg(long, default_value_t = 1.0)]
        speedup: f64,
        /// Directory of static UI assets served at `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Status {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    match cli.command {
        Command::Validate { dir } => commands::validate(&dir, &mut out),
        Command::Calibrate { file, out: block } => commands::calibrate(&file, block.as_deref(), &mut out, &mut err),
        Command::Tour { dir, walk, out: log, seed } => commands::tour(&dir, &walk, &log, seed, &mut out, &mut err),
        Command::Serve {
            dir,
            port,
            host,
            walk,
            seed,
            speedup,
            ui_dir,
        } => {
            drop((out, err));
            let options = server::ServeOptions {
                pack_dir: dir,
                host,
                port,
                walk,
                seed,
                speedup,
                ui_dir,
            };
            server::run_blocking(options)
        }
    }
}
