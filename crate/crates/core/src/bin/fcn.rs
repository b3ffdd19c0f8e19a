//! `fcn`: validate networks, run simulations, and derive timelines and
//! entropy reports from traces.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation or parse error,
//! 3 runtime error. Set `FCN_LOG` (e.g. `FCN_LOG=debug`) for diagnostics.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use thiserror::Error;

use fcn::chronology;
use fcn::entropy::EntropyModel;
use fcn::io::{self as fio, IoError};
use fcn::network::{classify_coupling, CouplingClass, NodeId, ThresholdRule};
use fcn::{simulate, EngineError, EventTrace, Mode, RunConfig};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse { .. } | IoError::UnsupportedSchema(_) | IoError::Validation(_) | IoError::Trace { .. } => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "fcn", version, about = "Causal networks of decaying two-level clocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Det,
    Sto,
}

#[derive(Debug, clap::Args)]
struct EntropyArgs {
    /// Source reservoir temperature, K.
    #[arg(long, default_value_t = EntropyModel::default().source_temperature())]
    t_source: f64,
    /// Environment reservoir temperature, K.
    #[arg(long, default_value_t = EntropyModel::default().environment_temperature())]
    t_env: f64,
    /// Constant vacuum entropy term, k_B.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    vacuum: f64,
}

impl EntropyArgs {
    fn model(&self) -> Result<EntropyModel, CliError> {
        EntropyModel::new(self.t_source, self.t_env, self.vacuum).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a network document and print its coupling classes.
    Validate {
        net: PathBuf,
        #[arg(long, default_value_t = ThresholdRule::default().coupling_fraction)]
        coupling_fraction: f64,
    },
    /// Simulate a network and write the event trace as JSONL.
    Run {
        net: PathBuf,
        #[arg(long, value_enum, default_value = "det")]
        mode: ModeArg,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Inclusive seed range `A..B`; writes one trace per seed.
        #[arg(long)]
        seeds: Option<String>,
        /// Run horizon in engine seconds.
        #[arg(long)]
        until: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        entropy: EntropyArgs,
    },
    /// Label absorptions with a standard clock and write the timeline CSV.
    Timeline {
        trace: PathBuf,
        #[arg(long)]
        clock: u64,
        /// Only label absorptions at this node.
        #[arg(long)]
        detector: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the per-decay entropy ledger CSV.
    Entropy {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        entropy: EntropyArgs,
    },
    /// Print summary counts, causal violations and clock resolution stats.
    Report {
        trace: PathBuf,
        #[command(flatten)]
        entropy: EntropyArgs,
    },
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_trace(path: &Path) -> Result<EventTrace, CliError> {
    Ok(fio::read_trace(open(path)?)?)
}

fn parse_seed_range(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed range {s:?}, expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let (a, b): (u64, u64) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

/// `trace.jsonl` -> `trace.seed7.jsonl`
fn seeded_path(out: &Path, seed: u64) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    out.with_file_name(name)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { net, coupling_fraction } => {
            let bytes = std::fs::read(&net).map_err(|e| CliError::Runtime(format!("{}: {e}", net.display())))?;
            let doc = fio::parse_network(&bytes)?;
            let network = doc.to_network().map_err(IoError::from)?;
            if !(coupling_fraction.is_finite() && coupling_fraction > 0.0) {
                return Err(CliError::Usage(format!(
                    "invalid coupling fraction {coupling_fraction}"
                )));
            }
            let coupling = classify_coupling(&network, &ThresholdRule { coupling_fraction });
            println!(
                "ok: {} nodes, {} arcs, {} standard clocks, {} injections",
                network.len(),
                network.arcs().count(),
                network.clocks().count(),
                doc.injections.len()
            );
            for (i, class) in coupling.classes.iter().enumerate() {
                match class {
                    CouplingClass::Cen(m) => {
                        let ids: Vec<String> = m.iter().map(ToString::to_string).collect();
                        println!("class {i}: CEN {{{}}}", ids.join(", "));
                    }
                    CouplingClass::Sen(n) => println!("class {i}: SEN node {n}"),
                }
            }
            for link in &coupling.links {
                println!(
                    "link: arc {} class {} -> class {}",
                    link.arc, link.from_class, link.to_class
                );
            }
            Ok(())
        }
        Command::Run {
            net,
            mode,
            seed,
            seeds,
            until,
            out,
            entropy,
        } => {
            let bytes = std::fs::read(&net).map_err(|e| CliError::Runtime(format!("{}: {e}", net.display())))?;
            let doc = fio::parse_network(&bytes)?;
            let network = doc.to_network().map_err(IoError::from)?;
            let injections = doc.injections();
            let model = entropy.model()?;
            let config = |mode: Mode| -> Result<RunConfig, CliError> {
                Ok(RunConfig::new(mode, until)
                    .map_err(|e| CliError::Usage(e.to_string()))?
                    .with_entropy_model(model))
            };

            let jobs: Vec<(Mode, PathBuf)> = match (mode, seed, seeds) {
                (ModeArg::Det, None, None) => vec![(Mode::Deterministic, out)],
                (ModeArg::Det, _, _) => {
                    return Err(CliError::Usage("--seed/--seeds only apply to --mode sto".into()));
                }
                (ModeArg::Sto, Some(seed), None) => vec![(Mode::Stochastic { seed }, out)],
                (ModeArg::Sto, None, Some(range)) => parse_seed_range(&range)?
                    .into_iter()
                    .map(|seed| (Mode::Stochastic { seed }, seeded_path(&out, seed)))
                    .collect(),
                (ModeArg::Sto, _, _) => {
                    return Err(CliError::Usage("--mode sto needs --seed N or --seeds A..B".into()));
                }
            };

            jobs.into_par_iter().try_for_each(|(mode, path)| {
                let result = simulate(network.clone(), &injections, config(mode)?)?;
                info!("{:?}: {} events -> {}", mode, result.trace.len(), path.display());
                fio::write_trace(create(&path)?, &result.trace)?;
                Ok(())
            })
        }
        Command::Timeline {
            trace,
            clock,
            detector,
            out,
        } => {
            let trace = read_trace(&trace)?;
            let clock = NodeId(clock);
            let (_, labels) =
                chronology::label_absorptions(&trace, clock, detector.map(NodeId)).map_err(|e| match e {
                    chronology::ChronologyError::UnknownClock(id) => {
                        CliError::Invalid(format!("unknown clock id {id}"))
                    }
                    other => CliError::Invalid(other.to_string()),
                })?;
            let (timeline, violations) = chronology::build_timeline(clock, labels, &trace);
            for v in &violations {
                eprintln!(
                    "causal violation: event {} labeled {} after descendant {} labeled {}",
                    v.ancestor, v.ancestor_time, v.descendant, v.descendant_time
                );
            }
            fio::write_timeline_csv(output(out.as_deref())?, &timeline, &trace)?;
            Ok(())
        }
        Command::Entropy { trace, out, entropy } => {
            let trace = read_trace(&trace)?;
            let ledger = fio::entropy_from_trace(&trace, &entropy.model()?)?;
            fio::write_entropy_csv(output(out.as_deref())?, &ledger)?;
            Ok(())
        }
        Command::Report { trace, entropy } => {
            let trace = read_trace(&trace)?;
            let summary = fio::summarize(&trace, &entropy.model()?)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FCN_LOG")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
