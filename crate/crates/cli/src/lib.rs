//! Command-line front end for pathcalc.

pub mod accept;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

/// Input the user can fix: bad flags, unknown ids, unreadable config.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "pathcalc", version, about = "Functional Itô calculus on sampled paths")]
pub struct Cli {
    /// Flat TOML file of default flag values.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Numerical Dupire jet of a functional at a stopped path.
    Derive(RunConfig),
    /// Riesz measure and atoms of the Fréchet derivative.
    Frechet(RunConfig),
    /// Euler–Maruyama ensemble of a built-in model.
    SfdeSim(RunConfig),
    /// Itô residual convergence study.
    VerifyIto(RunConfig),
    /// Generator limit against its Dupire and Fréchet forms.
    VerifyGenerator(RunConfig),
    /// Dupire/Fréchet coherence gaps over a set of paths.
    Coherence(RunConfig),
    /// Runs the acceptance manifest.
    Accept(RunConfig),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Derive(_) => "derive",
            Command::Frechet(_) => "frechet",
            Command::SfdeSim(_) => "sfde-sim",
            Command::VerifyIto(_) => "verify-ito",
            Command::VerifyGenerator(_) => "verify-generator",
            Command::Coherence(_) => "coherence",
            Command::Accept(_) => "accept",
        }
    }

    fn flags(&self) -> &RunConfig {
        match self {
            Command::Derive(c)
            | Command::Frechet(c)
            | Command::SfdeSim(c)
            | Command::VerifyIto(c)
            | Command::VerifyGenerator(c)
            | Command::Coherence(c)
            | Command::Accept(c) => c,
        }
    }
}

/// What a command hands back for emission.
#[derive(Debug)]
pub struct Report {
    pub csv: Option<String>,
    pub json: String,
    pub pass: bool,
}

/// Parses `argv` (including the program name), runs the command, and
/// returns the process exit code: 0 pass, 1 tolerance failure, 2 usage or
/// input error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = std::env::var("PATHCALC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        pathcalc_core::exec::init_threads(n);
    }
    match execute(&cli) {
        Ok(r) => {
            if r.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Report> {
    let file = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = cli.command.flags().clone().or(file);
    let name = cli.command.name();
    let report = match &cli.command {
        Command::Derive(_) => commands::derive(&cfg)?,
        Command::Frechet(_) => commands::frechet(&cfg)?,
        Command::SfdeSim(_) => commands::sfde_sim(&cfg)?,
        Command::VerifyIto(_) => commands::verify_ito(&cfg)?,
        Command::VerifyGenerator(_) => commands::verify_generator(&cfg)?,
        Command::Coherence(_) => commands::coherence(&cfg)?,
        Command::Accept(_) => commands::accept(&cfg)?,
    };
    print!("{}", report.json);
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        if let Some(csv) = &report.csv {
            fs::write(dir.join(format!("{name}.csv")), csv)?;
        }
        fs::write(dir.join(format!("{name}.json")), &report.json)?;
    }
    Ok(report)
}
