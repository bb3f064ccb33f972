//! `currents`: de-noising, energy evaluation, flat norms, line detection and
//! synthetic scenes from the command line.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 for
//! file-system errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use currents_core::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "currents", version, about = "Image analysis with weighted 1-currents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimise the energy starting from the input image and write the result.
    Denoise(commands::DenoiseArgs),
    /// Evaluate the seven energy terms of an image against a reference.
    Energy(commands::EnergyArgs),
    /// Flat norm of a segment-tuple current, or of the difference of two.
    Flatnorm(commands::FlatnormArgs),
    /// Detect and complete straight lines in an image or a segment-tuple current.
    Lines(commands::LinesArgs),
    /// Generate a synthetic scene with its exact boundary current.
    Synth(commands::SynthArgs),
}

/// Flags shared by every subcommand; they override the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    gamma3: Option<f64>,
    #[arg(long)]
    gamma4: Option<f64>,
    #[arg(long)]
    gamma5: Option<f64>,
    #[arg(long)]
    gamma6: Option<f64>,
    #[arg(long)]
    gamma7: Option<f64>,
    /// Flat-norm unit length.
    #[arg(long)]
    scale: Option<f64>,
    /// Levels in the curvature-current ladder.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    /// The configuration file (or defaults) with flag overrides applied.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let w = &mut c.weights;
        let slots = [
            (&mut w.gamma1, self.gamma1),
            (&mut w.gamma2, self.gamma2),
            (&mut w.gamma3, self.gamma3),
            (&mut w.gamma4, self.gamma4),
            (&mut w.gamma5, self.gamma5),
            (&mut w.gamma6, self.gamma6),
            (&mut w.gamma7, self.gamma7),
        ];
        for (slot, v) in slots {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(s) = self.scale {
            c.energy.scale = s;
        }
        if let Some(l) = self.levels {
            c.energy.levels = l;
        }
        if let Some(t) = self.threads {
            c.threads = Some(t);
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>().is_some()
            || e.downcast_ref::<currents_core::Error>().is_some_and(currents_core::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Denoise(a) => commands::denoise(a),
        Command::Energy(a) => commands::energy(a),
        Command::Flatnorm(a) => commands::flatnorm(a),
        Command::Lines(a) => commands::lines(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
