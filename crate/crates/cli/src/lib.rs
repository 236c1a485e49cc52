//! Command-line front end for the `variogram` library.
//!
//! Every command prints a JSON envelope `{command, result, warnings}`. Commands
//! that produce a data artifact (CSV or a model file) write it to `--output`
//! (stdout by default); the envelope then goes to stderr when the artifact
//! occupies stdout. Exit codes: 0 success, 1 domain or validation failure,
//! 2 I/O, parse or usage failure.

pub mod commands;
pub mod io;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error("{kind}: {0}", kind = kind_name(.0))]
    Domain(#[from] variogram::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            _ => 2,
        }
    }
}

fn kind_name(e: &variogram::Error) -> &'static str {
    use variogram::Error::*;
    match e {
        InvalidInput(_) => "InvalidInput",
        SigmaTooSmall { .. } => "SigmaTooSmall",
        NotConditionallyNegDef { .. } => "NotConditionallyNegDef",
        Unbounded => "Unbounded",
        SingularInput { .. } => "SingularInput",
        NotInvertible { .. } => "NotInvertible",
        SingularModel { .. } => "SingularModel",
        Timeout { .. } => "Timeout",
        InvalidVariogram(_) => "InvalidVariogram",
    }
}

/// Machine-readable command report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub command: String,
    pub result: serde_json::Value,
    pub warnings: Vec<String>,
}

/// What a command hands back to the dispatcher.
#[derive(Debug)]
pub struct Outcome {
    pub envelope: Envelope,
    /// Output path and content of a data artifact.
    pub artifact: Option<(String, String)>,
    pub exit_code: i32,
}

#[derive(Debug, Parser)]
#[command(
    name = "variogram",
    version,
    about = "Variogram-matrix tools for stationary Gaussian (Kriging) models",
    after_help = "Commands taking --seed are bit-reproducible for a fixed seed on the same build. \
                  Without --seed a fresh seed is drawn and reported in the JSON output. \
                  All computation is single-threaded. Use '-' for stdin or stdout."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    Cov,
    Gamma,
    Corr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMethod {
    Rejection,
    Gram,
    Cholesky,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a variogram matrix (CSV, or a model JSON file) for validity.
    Validate {
        matrix: String,
        /// Also check that this variance is admissible; defaults to the model's
        /// sigma2 when the input is a model file.
        #[arg(long)]
        sigma2: Option<f64>,
    },
    /// Convert between covariance, variogram and correlation matrices.
    Convert {
        #[arg(long, value_enum)]
        from: MatrixKind,
        #[arg(long, value_enum)]
        to: MatrixKind,
        input: String,
        /// Common variance; required when converting from a variogram.
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Gaussian log-likelihood of data rows under a model.
    Likelihood { model: String, data: String },
    /// Estimate a model from data rows with the projection estimator.
    Estimate {
        data: String,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Draw data rows from a model.
    Simulate {
        model: String,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Draw from N(mu 1, sigma2 11' - Gamma) instead of mu plus the
        /// projected field.
        #[arg(long)]
        full: bool,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Draw correlation matrices from a prior on the elliptope.
    SamplePrior {
        #[arg(long, value_enum)]
        method: PriorMethod,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Draw budget for the rejection method.
        #[arg(long, default_value_t = variogram::elliptope::DEFAULT_MAX_DRAWS)]
        max_draws: u64,
        /// Report acceptance statistics without the matrices.
        #[arg(long)]
        stats_only: bool,
    },
    /// Kriging prediction at an untried location.
    Predict {
        model: String,
        data: String,
        /// One CSV row: the target variance followed by its covariances with
        /// the observed locations.
        #[arg(long)]
        cov_row: String,
        /// Refuse covariances with a negative correlation between any two
        /// locations.
        #[arg(long)]
        require_positive: bool,
    },
    /// Boundary of the 3x3 elliptope section at z = c, as x,y CSV.
    ElliptopeSection {
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
}

pub fn execute(command: Command) -> Result<Outcome, CliError> {
    use commands::*;
    match command {
        Command::Validate { matrix, sigma2 } => validate(&matrix, sigma2),
        Command::Convert {
            from,
            to,
            input,
            sigma2,
            output,
        } => convert(from, to, &input, sigma2, &output),
        Command::Likelihood { model, data } => likelihood(&model, &data),
        Command::Estimate { data, output } => estimate(&data, &output),
        Command::Simulate {
            model,
            count,
            seed,
            full,
            output,
        } => simulate(&model, count, seed, full, &output),
        Command::SamplePrior {
            method,
            n,
            count,
            seed,
            max_draws,
            stats_only,
        } => sample_prior(method, n, count, seed, max_draws, stats_only),
        Command::Predict {
            model,
            data,
            cov_row,
            require_positive,
        } => predict(&model, &data, &cov_row, require_positive),
        Command::ElliptopeSection { c, points, output } => elliptope_section(c, points, &output),
    }
}

/// Runs a parsed command, writes its outputs and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match execute(cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let envelope = serde_json::to_string_pretty(&outcome.envelope).expect("envelope serializes");
    let mut artifact_on_stdout = false;
    if let Some((path, content)) = &outcome.artifact {
        artifact_on_stdout = path == "-";
        if let Err(e) = io::write_output(path, content) {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    }
    if artifact_on_stdout {
        eprintln!("{envelope}");
    } else {
        println!("{envelope}");
    }
    outcome.exit_code
}
