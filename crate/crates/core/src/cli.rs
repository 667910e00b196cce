//! Command-line front end.
//!
//! Exit codes: 0 on success (including runs whose estimates are undefined),
//! 1 for configuration, input or I/O errors, 2 for usage errors, 3 when
//! `reproduce-paper` fails its self-check.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{parse_config, Config, ConfigError};
use crate::estimators::ObservedCounts;
use crate::report::{self, ReportError};
use crate::simulate::{monte_carlo, run_scenario, run_sweep, Mode};

#[derive(Debug, Parser)]
#[command(name = "tndsim", version, about = "Test-negative design VE simulation and estimation")]
pub struct Cli {
    /// Master seed; overrides `seed` in config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Output format (default: csv for sweep, text otherwise).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recompute the three worked examples and check them against exact fractions.
    ReproducePaper,
    /// Estimate VE from observed care-seeker counts under every method and control group.
    Estimate(EstimateArgs),
    /// Run one scenario file (kind = scenario).
    Simulate { config: PathBuf },
    /// Run a sweep file (kind = sweep).
    Sweep { config: PathBuf },
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV file with header a,b,c,g,h,i and one data row.
    #[arg(long, conflicts_with_all = ["a", "b", "c", "g", "h", "i"])]
    pub csv: Option<PathBuf>,
    /// Vaccinated, target positive.
    #[arg(short, required_unless_present = "csv")]
    pub a: Option<f64>,
    /// Vaccinated, other-pathogen positive.
    #[arg(short, required_unless_present = "csv")]
    pub b: Option<f64>,
    /// Vaccinated, pan-negative.
    #[arg(short, required_unless_present = "csv")]
    pub c: Option<f64>,
    /// Unvaccinated, target positive.
    #[arg(short, required_unless_present = "csv")]
    pub g: Option<f64>,
    /// Unvaccinated, other-pathogen positive.
    #[arg(long, required_unless_present = "csv")]
    pub h: Option<f64>,
    /// Unvaccinated, pan-negative.
    #[arg(short, required_unless_present = "csv")]
    pub i: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Report(ReportError::SelfCheck { .. }) => 3,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load(path: &Path) -> Result<Config, CliError> {
    parse_config(&read(path)?).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn read_counts_csv(path: &Path) -> Result<ObservedCounts, CliError> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let mut rows = reader.records();
    let record = rows
        .next()
        .ok_or_else(|| bad("no data row".into()))?
        .map_err(|e| bad(e.to_string()))?;
    if rows.next().is_some() {
        return Err(bad("expected exactly one data row".into()));
    }
    let mut values = [0.0; 6];
    for (slot, name) in values.iter_mut().zip(["a", "b", "c", "g", "h", "i"]) {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))?;
        let raw = record.get(idx).unwrap_or("");
        *slot = raw
            .parse::<f64>()
            .map_err(|_| bad(format!("column {name}: {raw:?} is not a number")))?;
    }
    let [a, b, c, g, h, i] = values;
    ObservedCounts::new(a, b, c, g, h, i).map_err(|e| bad(e.to_string()))
}

/// Runs a parsed command and returns the report text.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let format = cli.format;
    match &cli.command {
        Command::ReproducePaper => Ok(match format.unwrap_or(Format::Text) {
            Format::Text => report::reproduce_paper_text()?,
            Format::Csv => report::reproduce_paper_csv()?,
        }),
        Command::Estimate(args) => {
            let counts = match &args.csv {
                Some(path) => read_counts_csv(path)?,
                None => {
                    let v = |x: Option<f64>| x.expect("clap enforces required counts");
                    ObservedCounts::new(v(args.a), v(args.b), v(args.c), v(args.g), v(args.h), v(args.i))
                        .map_err(|e| CliError::Input(e.to_string()))?
                }
            };
            let r = report::estimate_all(&counts);
            Ok(match format.unwrap_or(Format::Text) {
                Format::Text => r.text(),
                Format::Csv => r.csv(),
            })
        }
        Command::Simulate { config } => {
            let Config::Scenario {
                mut scenario,
                replications,
            } = load(config)?
            else {
                return Err(CliError::Input(format!(
                    "{}: kind = sweep, use the sweep command",
                    config.display()
                )));
            };
            if cli.seed.is_some() {
                scenario.seed = cli.seed;
            }
            let (outcome, mc) = if scenario.mode == Mode::Stochastic && replications > 1 {
                let seed = scenario.seed.expect("validated stochastic scenario has a seed");
                (
                    run_scenario(&scenario.deterministic()),
                    Some(monte_carlo(&scenario, replications, seed)),
                )
            } else {
                (run_scenario(&scenario), None)
            };
            Ok(match format.unwrap_or(Format::Text) {
                Format::Text => report::scenario_text(&scenario, &outcome, mc.as_ref()),
                Format::Csv => report::scenario_csv(&scenario, &outcome, mc.as_ref()),
            })
        }
        Command::Sweep { config } => {
            let Config::Sweep(mut spec) = load(config)? else {
                return Err(CliError::Input(format!(
                    "{}: kind = scenario, use the simulate command",
                    config.display()
                )));
            };
            if cli.seed.is_some() {
                spec.base.seed = cli.seed;
            }
            let result = run_sweep(&spec).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(match format.unwrap_or(Format::Csv) {
                Format::Csv => report::sweep_csv(&result),
                Format::Text => report::sweep_text(&result),
            })
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.output {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|text| emit(&cli, &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
