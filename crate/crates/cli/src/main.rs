//! `honeycomb-edge`: band structures, Dirac-point data, 1D Dirac spectra and ribbon edge spectra
//! of honeycomb Schroedinger operators, plus the acceptance checks.
//!
//! Exit status: 0 on success, 1 when `validate` finds a failing criterion, 2 on any error.

mod commands;
mod config;
mod output;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use config::{FlavorName, RunConfig, TEMPLATE};
use output::Output;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "honeycomb-edge", version, about = "Edge states of honeycomb Schroedinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration (see `init`)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads for the parallel parts
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// domain-wall scale
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// edge direction as A1,B1
    #[arg(long, global = true, value_parser = parse_edge, allow_hyphen_values = true)]
    edge: Option<[i64; 2]>,
    #[arg(long, global = true, value_enum)]
    flavor: Option<FlavorName>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a configuration template with all defaults
    Init {
        /// overwrite an existing file
        #[arg(long)]
        force: bool,
    },
    /// Bands of the unperturbed operator along G-M-K-G
    Bands,
    /// Dirac point, Fermi velocity, couplings and gauge diagnostics
    DiracPoint,
    /// Bound states of the effective 1D Dirac operators over a mu grid
    Dirac1d,
    /// Ribbon eigenvalues near E_D over one period of k_par
    Edge,
    /// Run the acceptance criteria
    Validate {
        /// only these criteria, e.g. 1,2,6
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// also fail on the recorded known conflicts
        #[arg(long)]
        strict: bool,
    },
}

fn parse_edge(s: &str) -> Result<[i64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?]),
        _ => Err(format!("expected A1,B1, got {s}")),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Init { .. } => "init",
        Command::Bands => "bands",
        Command::DiracPoint => "dirac-point",
        Command::Dirac1d => "dirac1d",
        Command::Edge => "edge",
        Command::Validate { .. } => "validate",
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Init { force } = cli.command {
        let path = cli.config.unwrap_or_else(|| PathBuf::from("honeycomb-edge.toml"));
        if path.exists() && !force {
            bail!("{} exists; pass --force to overwrite", path.display());
        }
        std::fs::write(&path, TEMPLATE).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        return Ok(true);
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(d) = cli.delta {
        cfg.delta = d;
    }
    if let Some(e) = cli.edge {
        cfg.edge = e;
    }
    if let Some(f) = cli.flavor {
        cfg.flavor = f;
    }
    if let Some(o) = cli.out {
        cfg.output = o;
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let out = Output::new(&cfg.output, cfg.header(command_name(&cli.command)))?;
    match cli.command {
        Command::Init { .. } => unreachable!(),
        Command::Bands => commands::bands(&cfg, &out)?,
        Command::DiracPoint => commands::dirac_point(&cfg, &out)?,
        Command::Dirac1d => commands::dirac1d(&cfg, &out)?,
        Command::Edge => commands::edge(&cfg, &out)?,
        Command::Validate { only, strict } => return commands::validate(&cfg, &out, &only, strict),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
