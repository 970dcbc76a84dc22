//! Command-line front end: CSV ingestion, fit and simulate modes, JSON/CSV
//! reports.

pub mod args;
pub mod error;
pub mod fit;
pub mod ingest;
pub mod output;
pub mod simulate;

use std::path::{Path, PathBuf};

pub use args::Cli;
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, InputRecord, Schema};

use args::{Command, FitArgs, Format};

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn curve_path(args: &FitArgs) -> Option<PathBuf> {
    args.curve.clone().or_else(|| {
        args.common.out.as_ref().map(|out| {
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.with_file_name(format!("{stem}_curve.csv"))
        })
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fit(args) => {
            let out = fit::run_fit(args)?;
            let text = match args.common.format {
                Format::Json => json(&out.report)?,
                Format::Csv => fit::report_csv(&out.report)?,
            };
            output::emit(args.common.out.as_deref(), &text)?;
            if let Some(path) = curve_path(args) {
                output::emit(Some(Path::new(&path)), &fit::curve_csv(&out.curve)?)?;
            }
        }
        Command::Simulate(args) => {
            let (report, _) = simulate::run_simulate(args)?;
            let text = match args.common.format {
                Format::Json => json(&report)?,
                Format::Csv => simulate::metrics_csv(&report.rows)?,
            };
            output::emit(args.common.out.as_deref(), &text)?;
        }
    }
    Ok(())
}
