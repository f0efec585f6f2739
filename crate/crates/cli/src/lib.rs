//! Command-line front end for `fracheat`.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 numerical non-convergence
//! or a covariance that no jitter makes factorizable, 3 Hurst index at or
//! below the existence threshold, 4 verification failure.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;

use thiserror::Error;

pub use config::{parse_config, CommandKind, Format, RunConfig};
pub use output::Document;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }
}

impl From<fracheat::Error> for CliError {
    fn from(e: fracheat::Error) -> Self {
        use fracheat::Error as E;
        match e {
            E::Domain(_) | E::Unsupported(_) => CliError::Usage(e.to_string()),
            E::Threshold { .. } => CliError::Threshold(e.to_string()),
            E::NotPsd { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 4;

fn install_thread_cap(threads: Option<usize>) {
    if let Some(n) = threads {
        // Already initialized when run twice in one process; the first cap wins.
        _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Executes a validated config, writing the document to its destination.
/// The document is written whole, even when the exit code reports
/// non-convergence or failed criteria; on errors nothing is written.
pub fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    install_thread_cap(cfg.threads);
    let doc = commands::execute(cfg)?;
    let bytes = match cfg.format {
        Format::Json => output::render_json(&doc)?,
        Format::Csv => output::render_csv(&doc)?,
    };
    match &cfg.output {
        Some(path) => output::write_atomic(path, &bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    let code = if cfg.command == CommandKind::Verify && doc.values.get("all_passed") != Some(&true.into()) {
        EXIT_VERIFY_FAILED
    } else if !doc.converged {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    };
    Ok(code)
}

/// Parses `args` (without the program name), reading `--config` if given,
/// and runs. Errors are reported on stderr.
pub fn main_with_args(args: &[String]) -> i32 {
    if let Some(text) = config::help_or_version(args) {
        print!("{text}");
        return EXIT_OK;
    }
    let result = load(args).and_then(|cfg| run(&cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fracheat: {e}");
            e.exit_code()
        }
    }
}

fn load(args: &[String]) -> Result<RunConfig, CliError> {
    let text = match config::config_path(args) {
        Some(path) => Some(
            std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    parse_config(args, text.as_deref())
}
