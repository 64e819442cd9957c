use std::fs;
use std::io::{self, IsTerminal};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noesis_core::{
    parse_context, replay_from, scale_scenario, serialize_context, ConceptLattice, FormalContext, Format, Implication,
    LabelMode, ScaleError, Scenario,
};

mod explore;

/// Conceptual spaces as formal contexts: scale scenarios, build lattices and
/// run learning sessions.
#[derive(Debug, Parser)]
#[command(name = "noesis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scale a scenario into a formal context.
    Scale {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Write the context here instead of stdout.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Enumerate the concepts of a context and print how many there are.
    Lattice {
        /// Context file, `.json` or `.cxt`.
        context: PathBuf,
        /// Write the Hasse diagram as Graphviz DOT.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
        /// Write concepts and Hasse edges as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        /// Show every extent and intent on DOT nodes instead of reduced labels.
        #[arg(long)]
        full_labels: bool,
    },
    /// Replay a cue script against a reference context.
    Replay {
        /// Context the scripted oracle answers from.
        #[arg(long, value_name = "FILE")]
        reference: PathBuf,
        /// JSON array of cues, each `{"premise": [...], "conclusion": [...]}`.
        #[arg(long, value_name = "FILE")]
        script: PathBuf,
        /// Starting context; defaults to the reference's attributes with no objects.
        #[arg(long, value_name = "FILE")]
        initial: Option<PathBuf>,
        /// Write the JSON Lines trace here instead of stdout.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Write the lattice and ensemble of every granule into this directory.
        #[arg(long, value_name = "DIR")]
        snapshots: Option<PathBuf>,
    },
    /// Run a session in the terminal with you as the oracle.
    Explore {
        /// Starting context.
        #[arg(long, value_name = "FILE")]
        context: PathBuf,
        /// Write the JSON Lines trace here when the session ends.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        /// Address to bind.
        #[arg(long, env = noesis_service::ADDR_ENV, default_value = noesis_service::DEFAULT_ADDR)]
        addr: SocketAddr,
        /// Mirror every session's trace into this directory.
        #[arg(long, value_name = "DIR")]
        trace_dir: Option<PathBuf>,
    },
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub(crate) enum Failure {
    Io(String),
    Parse(String),
    Validation(String),
    Protocol(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Protocol(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Parse(m) | Failure::Validation(m) | Failure::Protocol(m) => m,
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn load_context(path: &Path) -> Result<FormalContext, Failure> {
    parse_context(&read(path)?, Format::from_path(path)).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn scale(scenario: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let parsed = Scenario::from_json(&read(scenario)?).map_err(|e| Failure::Parse(format!("{}: {e}", scenario.display())))?;
    let (ctx, _) = scale_scenario(&parsed).map_err(|e| match e {
        ScaleError::Invalid(report) => Failure::Validation(format!(
            "{}: invalid scenario\n{}",
            scenario.display(),
            serde_json::to_string_pretty(&report).expect("reports serialize")
        )),
        other => Failure::Validation(format!("{}: {other}", scenario.display())),
    })?;
    let bytes = serialize_context(&ctx, Format::Json).expect("json serialization is total");
    match output {
        Some(path) => write(path, bytes),
        None => {
            print!("{}", String::from_utf8(bytes).expect("json is utf-8"));
            Ok(())
        }
    }
}

fn lattice(context: &Path, dot: Option<&Path>, json: Option<&Path>, full_labels: bool) -> Result<(), Failure> {
    let lattice = ConceptLattice::enumerate(&load_context(context)?);
    if let Some(path) = dot {
        write(path, lattice.export_dot(if full_labels { LabelMode::Full } else { LabelMode::Reduced }))?;
    }
    if let Some(path) = json {
        write(path, lattice.to_json())?;
    }
    println!("{} concepts", lattice.len());
    Ok(())
}

fn replay(
    reference: &Path,
    script: &Path,
    initial: Option<&Path>,
    trace: Option<&Path>,
    snapshots: Option<&Path>,
) -> Result<(), Failure> {
    let reference_ctx = load_context(reference)?;
    let cues: Vec<Implication> =
        serde_json::from_slice(&read(script)?).map_err(|e| Failure::Parse(format!("{}: {e}", script.display())))?;
    let initial_ctx = match initial {
        Some(path) => load_context(path)?,
        None => reference_ctx.without_objects(),
    };
    let run = replay_from(initial_ctx, &reference_ctx, &cues).map_err(|e| Failure::Protocol(e.to_string()))?;
    if let Some(dir) = snapshots {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        for snap in &run.snapshots {
            write(&dir.join(format!("granule-{:03}.lattice.json", snap.granule)), snap.lattice.to_json())?;
            write(&dir.join(format!("granule-{:03}.ensemble.json", snap.granule)), snap.ensemble.to_json())?;
        }
    }
    match trace {
        Some(path) => {
            write(path, run.to_jsonl())?;
            for (t, cue) in run.supporting_cues().iter().enumerate() {
                println!("t={t} {}", cue.as_deref().unwrap_or("-"));
            }
        }
        None => print!("{}", run.to_jsonl()),
    }
    Ok(())
}

fn serve(addr: SocketAddr, trace_dir: Option<PathBuf>) -> Result<(), Failure> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime
        .block_on(noesis_service::serve(addr, trace_dir))
        .map_err(|e| Failure::Io(format!("serving on {addr}: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Scale { scenario, output } => scale(&scenario, output.as_deref()),
        Command::Lattice { context, dot, json, full_labels } => lattice(&context, dot.as_deref(), json.as_deref(), full_labels),
        Command::Replay { reference, script, initial, trace, snapshots } => {
            replay(&reference, &script, initial.as_deref(), trace.as_deref(), snapshots.as_deref())
        }
        Command::Explore { context, trace } => {
            let stdin = io::stdin();
            explore::run(&load_context(&context)?, &mut stdin.lock(), &mut io::stdout(), trace.as_deref())
        }
        Command::Serve { addr, trace_dir } => serve(addr, trace_dir),
    }
}

pub(crate) fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && io::stdout().is_terminal()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let prefix = if use_color() && io::stderr().is_terminal() { "\x1b[31merror\x1b[0m" } else { "error" };
            eprintln!("{prefix}: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
