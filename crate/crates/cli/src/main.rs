use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{Engine, Mode};

/// Single-photon spectra of an optomechanical cavity and reconstruction of
/// the mechanical state from them.
#[derive(Parser, Debug)]
#[command(name = "optomech", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override any config entry, e.g. `--set numerics.n_d=60` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// g0 / omega_m.
    #[arg(long)]
    pub g0: Option<f64>,
    /// gamma_c / omega_m.
    #[arg(long)]
    pub gamma_c: Option<f64>,
    /// Kernel summation dimension.
    #[arg(long)]
    pub n_d: Option<usize>,
    /// Truncation N of the reconstructed state.
    #[arg(short = 'N', long)]
    pub truncation: Option<usize>,
    /// Seed of a random plan.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the spectrum of the configured state.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct the state from a spectrum file.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Columnar spectrum file.
        #[arg(short, long)]
        spectrum: PathBuf,
        /// State file to compute the fidelity against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Compare the closed-form emission spectrum with the time-domain oracle.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Diagonal reconstructions for N = n_min..=n_max with a convergence check.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        /// Read the spectrum from a file instead of synthesizing it.
        #[arg(short, long)]
        spectrum: Option<PathBuf>,
    },
    /// Fidelity between two state (or result) files.
    Fidelity { a: PathBuf, b: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    IllPosed(String),
    NotConverged(String),
    Io(String),
    Resource(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::IllPosed(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Io(_) => 5,
            CliError::Resource(_) => 6,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::IllPosed(m)
            | CliError::NotConverged(m)
            | CliError::Io(m)
            | CliError::Resource(m)
            | CliError::Failed(m) => m,
        }
    }
}

impl From<optomech_tomo::Error> for CliError {
    fn from(e: optomech_tomo::Error) -> Self {
        use optomech_tomo::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidInput(_) => CliError::Usage(msg),
            E::IllPosed { .. } => CliError::IllPosed(msg),
            E::MissingPoints(_) | E::Io(_) => CliError::Io(msg),
            E::Resource(_) | E::Integrator(_) => CliError::Resource(msg),
            E::InternalConsistency(_) => CliError::Failed(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth { common } => commands::synth(&common),
        Command::Reconstruct {
            common,
            spectrum,
            reference,
        } => commands::reconstruct(&common, &spectrum, reference.as_deref()),
        Command::Validate { common } => commands::validate(&common),
        Command::Scan {
            common,
            n_min,
            n_max,
            spectrum,
        } => commands::scan(&common, n_min, n_max, spectrum.as_deref()),
        Command::Fidelity { a, b } => commands::fidelity(&a, &b),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
