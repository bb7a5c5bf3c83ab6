//! Subcommands behind the `statefuzz` binary.
//!
//! Exit codes: [`EXIT_OK`], [`EXIT_CRASH`] when a crash was found or
//! reproduced, [`EXIT_CONFIG`] for bad arguments or unreadable files, and
//! [`EXIT_NOT_REPRODUCIBLE`] when a history to minimize does not crash.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{minimize_history, Executor};
use crate::error::{Error, Result};
use crate::instrument;
use crate::stt::DEFAULT_REPETITION_CAP;
use crate::svscan::{self, VariableManifest};
use crate::targets::{self, Outcome};

mod fuzz;

pub use fuzz::{cmd_fuzz, median, FuzzArgs, TrialResult, SUMMARY_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_REPRODUCIBLE: i32 = 3;
pub const EXIT_CRASH: i32 = 10;

/// Environment variable naming a seed corpus directory; takes precedence
/// over `--corpus`.
pub const SEED_DIR_ENV: &str = "STATEFUZZ_SEED_DIR";

#[derive(Debug, Parser)]
#[command(name = "statefuzz", version, about = "Stateful greybox fuzzing guided by a state transition tree")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a fuzzing campaign (or several trials) against a bundled target.
    Fuzz(FuzzArgs),
    /// Re-execute an input file or a directory of inputs.
    Replay(ReplayArgs),
    /// Reduce a crashing input history to a 1-minimal list.
    Minimize(MinimizeArgs),
    /// Find enum-typed state variables in C sources.
    Svscan(SvscanArgs),
    /// Insert state-update calls into a C source file.
    Instrument(InstrumentArgs),
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub target: String,
    /// An input file, or a directory whose files are replayed in name order.
    pub path: PathBuf,
    /// Keep the target's persistent state between inputs.
    #[arg(long)]
    pub implicit: bool,
    #[arg(long, default_value_t = DEFAULT_REPETITION_CAP)]
    pub repetition_cap: u32,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub target: String,
    /// Directory holding the input history, one file per input.
    pub history: PathBuf,
    /// Where to write the reduced list; defaults to `history.min` next to
    /// the history directory.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SvscanArgs {
    /// Source files or directories to scan.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Keep this variable in the manifest but exclude it from instrumentation.
    #[arg(long = "block", value_name = "NAME")]
    pub block: Vec<String>,
    /// Manifest output file; stdout when absent.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InstrumentArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Instrumented output file; stdout when absent.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    /// Also write the runtime declaration header to this path.
    #[arg(long)]
    pub header: Option<PathBuf>,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Fuzz(args) => cmd_fuzz(&args),
        Command::Replay(args) => cmd_replay(&args),
        Command::Minimize(args) => cmd_minimize(&args),
        Command::Svscan(args) => cmd_svscan(&args),
        Command::Instrument(args) => cmd_instrument(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NotReproducible => EXIT_NOT_REPRODUCIBLE,
                _ => EXIT_CONFIG,
            }
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Files directly inside `dir`, sorted by name.
pub fn list_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every file of `dir` in name order.
pub fn read_inputs(dir: &Path) -> Result<Vec<Vec<u8>>> {
    list_inputs(dir)?.iter().map(|p| read(p)).collect()
}

/// Writes `inputs` as `000000.bin`, `000001.bin`, ... into a new directory.
pub fn write_inputs(dir: &Path, inputs: &[Vec<u8>]) -> Result<()> {
    ensure_fresh_dir(dir, false)?;
    for (i, input) in inputs.iter().enumerate() {
        write(&dir.join(format!("{i:06}.bin")), input)?;
    }
    Ok(())
}

/// Creates `dir`, refusing to reuse a non-empty one unless `append`.
pub(crate) fn ensure_fresh_dir(dir: &Path, append: bool) -> Result<()> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if !append && entries.next().is_some() {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --append to reuse it)",
                dir.display()
            )));
        }
    }
    create_dir(dir)
}

fn outcome_label(outcome: Outcome) -> String {
    match outcome {
        Outcome::Ok => "ok".into(),
        Outcome::Reject => "reject".into(),
        Outcome::Crash(bug) => format!("crash({bug})"),
    }
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<i32> {
    let target = targets::create(&args.target)?;
    let inputs = if args.path.is_dir() {
        read_inputs(&args.path)?
    } else {
        vec![read(&args.path)?]
    };
    let mut exec = Executor::new(target, args.repetition_cap, &[], !args.implicit)?;
    for (i, input) in inputs.iter().enumerate() {
        let result = exec.execute(input);
        let path = exec.stt().path_id(result.trace.terminal);
        println!("{i:06}\t{}\t{path}", outcome_label(result.outcome));
        if let Outcome::Crash(_) = result.outcome {
            return Ok(EXIT_CRASH);
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_minimize(args: &MinimizeArgs) -> Result<i32> {
    let mut target = targets::create(&args.target)?;
    if !args.history.is_dir() {
        return Err(Error::Config(format!(
            "{} is not a history directory",
            args.history.display()
        )));
    }
    let history = read_inputs(&args.history)?;
    let minimized = minimize_history(&history, target.as_mut())?;
    let output = args.output.clone().unwrap_or_else(|| {
        args.history
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("history.min")
    });
    write_inputs(&output, &minimized)?;
    println!(
        "minimized {} -> {} inputs (ratio {:.3}) into {}",
        history.len(),
        minimized.len(),
        minimized.len() as f64 / history.len() as f64,
        output.display()
    );
    Ok(EXIT_OK)
}

const SOURCE_EXTENSIONS: [&str; 7] = ["c", "h", "cc", "cpp", "cxx", "hh", "hpp"];

fn collect_sources(paths: &[PathBuf]) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
                let entry = entry.map_err(|e| {
                    let p = e.path().unwrap_or(path).to_path_buf();
                    Error::io(p, e.into())
                })?;
                let is_source = entry
                    .path()
                    .extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e));
                if entry.file_type().is_file() && is_source {
                    files.push(entry.into_path());
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    files
        .into_iter()
        .map(|p| {
            let text = String::from_utf8_lossy(&read(&p)?).into_owned();
            Ok((p.display().to_string(), text))
        })
        .collect()
}

pub fn cmd_svscan(args: &SvscanArgs) -> Result<i32> {
    let sources = collect_sources(&args.paths)?;
    let mut diagnostics = Vec::new();
    let manifest = svscan::scan_sources(&sources, &args.block, &mut diagnostics);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let text = manifest.to_text();
    match &args.output {
        Some(path) => write(path, text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

pub fn cmd_instrument(args: &InstrumentArgs) -> Result<i32> {
    let manifest_text = String::from_utf8_lossy(&read(&args.manifest)?).into_owned();
    let manifest = VariableManifest::parse(&manifest_text)?;
    let source = String::from_utf8_lossy(&read(&args.file)?).into_owned();
    let out = instrument::inject(&source, &args.file.display().to_string(), &manifest);
    for conflict in &out.conflicts {
        eprintln!("{conflict}");
    }
    log::info!("{} injection sites", out.sites.len());
    match &args.output {
        Some(path) => write(path, &out.text)?,
        None => print!("{}", out.text),
    }
    if let Some(header) = &args.header {
        write(header, instrument::emit_runtime_header())?;
    }
    Ok(EXIT_OK)
}
