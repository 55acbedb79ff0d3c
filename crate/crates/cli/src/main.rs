//! `homog`: batch driver of the masonry homogenization pipeline.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use homog_core::Error;

#[derive(Parser)]
#[command(name = "homog", version, about = "Damage-mechanics homogenization of in-plane masonry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the periodic cell mesh and its summary.
    Rve(Common),
    /// Run the virtual-laboratory campaign on the cell.
    Vlab(Common),
    /// Fit the elastic matrices and the isotropic transformation.
    Isotropize(Common),
    /// Identify the macro parameters and export the macro law.
    Calibrate(Common),
    /// Run the micro and macro wall analyses.
    Validate(Common),
    /// Render stress, work and wall curves as SVG with CSV sidecars.
    Plot(Common),
}

/// Options shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Worker thread cap.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated case ids or ranges, e.g. `1,13` or `1-4,20`.
    #[arg(long, value_parser = parse_cases)]
    pub cases: Option<Cases>,
    /// Artifact directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cases(pub Vec<usize>);

fn parse_cases(text: &str) -> Result<Cases, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || format!("`{part}` is not a case id or range");
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Cases(out))
}

/// A failed command: process exit code plus the underlying error.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Geometry(_) => 2,
            Error::RankDeficient { .. } => 4,
            Error::NoProgress { .. } | Error::Infeasible(_) | Error::OutOfBounds { .. } => 5,
            Error::Parse { what, .. } if what == "csv" || what.ends_with(".csv") => 7,
            _ => 1,
        };
        Self { code, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::NotSpd(_) => "not_spd",
        Error::InvalidElastic { .. } => "invalid_elastic",
        Error::InvalidParams(_) => "invalid_params",
        Error::SnapBack { .. } => "snap_back",
        Error::OutOfSegment { .. } => "out_of_segment",
        Error::Geometry(_) => "geometry",
        Error::Diverged { .. } => "diverged",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::Singular => "singular",
        Error::OutOfBounds { .. } => "out_of_bounds",
        Error::NoProgress { .. } => "no_progress",
        Error::Infeasible(_) => "infeasible",
        Error::Parse { .. } => "parse",
        Error::MissingField(_) => "missing_field",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rve(c) => commands::rve(c),
        Command::Vlab(c) => commands::vlab(c),
        Command::Isotropize(c) => commands::isotropize(c),
        Command::Calibrate(c) => commands::calibrate(c),
        Command::Validate(c) => commands::validate(c),
        Command::Plot(c) => commands::plot(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut report = serde_json::json!({
                "error": kind(&f.error),
                "code": f.code,
                "message": f.error.to_string(),
            });
            match &f.error {
                Error::Infeasible(names) => report["constraints"] = serde_json::json!(names),
                Error::OutOfBounds { name, .. } => report["constraints"] = serde_json::json!([name]),
                _ => {}
            }
            eprintln!("{report}");
            ExitCode::from(f.code)
        }
    }
}
