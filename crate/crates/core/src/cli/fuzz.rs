//! The `fuzz` subcommand: single campaigns and repeated trials.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    create_dir, ensure_fresh_dir, read_inputs, write, write_inputs, EXIT_CRASH, EXIT_OK,
    SEED_DIR_ENV,
};
use crate::engine::{run_campaign, CampaignConfig, CampaignOutcome, CrashReport, StatsInterval, Variant};
use crate::error::{Error, Result};
use crate::stt::{export_dot, DEFAULT_REPETITION_CAP};
use crate::targets;

#[derive(Debug, Clone, Args)]
pub struct FuzzArgs {
    /// Target name, e.g. `mini_http2`.
    #[arg(long)]
    pub target: String,
    /// baseline, stt_only, stt_energy or full.
    #[arg(long, default_value = "full")]
    pub variant: String,
    /// Execution budget per trial, including the initial corpus.
    #[arg(long, default_value_t = 100_000)]
    pub max_execs: u64,
    /// Wall-clock budget per trial in seconds.
    #[arg(long)]
    pub max_seconds: Option<f64>,
    /// RNG seed; trial `i` uses `rng + i`.
    #[arg(long, default_value_t = 0)]
    pub rng: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u32,
    /// Snapshot every N executions, or every S seconds when written `Ss`.
    #[arg(long, default_value = "10000", value_parser = parse_interval)]
    pub stats_interval: StatsInterval,
    #[arg(long, default_value_t = DEFAULT_REPETITION_CAP)]
    pub repetition_cap: u32,
    /// Let the target's persistent state carry over between executions.
    #[arg(long)]
    pub no_implicit_reset: bool,
    /// Ignore updates of this state variable.
    #[arg(long = "block", value_name = "VAR")]
    pub block: Vec<String>,
    /// Initial corpus directory; the target's built-in seeds when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Keep fuzzing after the first crash.
    #[arg(long)]
    pub keep_going: bool,
    #[arg(long, default_value_t = 128)]
    pub max_len: usize,
    #[arg(short = 'o', long = "output", default_value = "statefuzz-out")]
    pub output: PathBuf,
    /// Write into an existing, non-empty output directory.
    #[arg(long)]
    pub append: bool,
}

fn parse_interval(s: &str) -> std::result::Result<StatsInterval, String> {
    let parsed = match s.strip_suffix('s') {
        Some(secs) => secs.parse::<f64>().ok().filter(|v| *v > 0.0).map(StatsInterval::Seconds),
        None => s.parse::<u64>().ok().filter(|v| *v > 0).map(StatsInterval::Executions),
    };
    parsed.ok_or_else(|| format!("expected a positive execution count or seconds like `1s`, got `{s}`"))
}

impl FuzzArgs {
    pub fn config(&self, rng_seed: u64) -> Result<CampaignConfig> {
        let config = CampaignConfig {
            variant: self.variant.parse::<Variant>()?,
            max_executions: Some(self.max_execs),
            max_seconds: self.max_seconds,
            rng_seed,
            repetition_cap: self.repetition_cap,
            reset_implicit_state: !self.no_implicit_reset,
            stats_interval: self.stats_interval,
            max_len: self.max_len,
            continue_after_crash: self.keep_going,
            blocklist: self.block.clone(),
            ..CampaignConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    fn corpus_dir(&self) -> Option<PathBuf> {
        std::env::var_os(SEED_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| self.corpus.clone())
    }
}

/// Per-trial line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: u32,
    pub rng_seed: u64,
    pub executions_to_crash: Option<u64>,
    pub bug_id: Option<String>,
    pub executions: u64,
    pub features: usize,
    pub stt_nodes: usize,
    pub transition_coverage: usize,
}

pub const SUMMARY_HEADER: &str =
    "trial,rng_seed,executions_to_crash,bug_id,executions,features,stt_nodes,transition_coverage";

/// Median; the mean of the two middle values for even counts. Infinite
/// values sort last, so a majority of missed crashes gives `inf`.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn format_number(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else if v.fract() == 0.0 {
        format!("{}", v as u64)
    } else {
        format!("{v:.1}")
    }
}

#[derive(Serialize)]
struct Report<'a> {
    target: &'a str,
    variant: Variant,
    rng_seed: u64,
    executions: u64,
    features: usize,
    stt_nodes: usize,
    transition_coverage: usize,
    corpus_size: usize,
    crashes: u64,
    crash: Option<&'a CrashReport>,
}

fn write_artifacts(dir: &Path, target: &str, config: &CampaignConfig, outcome: &CampaignOutcome) -> Result<()> {
    let descriptor = targets::create(target)?.descriptor();
    let stats = &outcome.stats;
    write(&dir.join("stats.csv"), stats.to_csv())?;
    let mut json = serde_json::to_string_pretty(&outcome.stt.snapshot())?;
    json.push('\n');
    write(&dir.join("stt.json"), json)?;
    write(&dir.join("stt.dot"), export_dot(&outcome.stt.compact(), &descriptor.labels()))?;
    let report = Report {
        target,
        variant: config.variant,
        rng_seed: config.rng_seed,
        executions: stats.executions,
        features: stats.features,
        stt_nodes: stats.stt_nodes,
        transition_coverage: stats.transition_coverage,
        corpus_size: stats.corpus_size,
        crashes: stats.crashes,
        crash: outcome.crash.as_ref(),
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write(&dir.join("report.json"), json)?;
    if let Some(crash) = &outcome.crash {
        let crash_dir = dir.join("crash");
        create_dir(&crash_dir)?;
        write(&crash_dir.join("input.bin"), &crash.crashing_input)?;
        write_inputs(&crash_dir.join("history"), &crash.input_history)?;
    }
    Ok(())
}

fn run_trial(args: &FuzzArgs, trial: u32, corpus: &[Vec<u8>], dir: &Path) -> Result<TrialResult> {
    let rng_seed = args.rng.wrapping_add(u64::from(trial));
    let config = args.config(rng_seed)?;
    let target = targets::create(&args.target)?;
    let seeds = if corpus.is_empty() { target.seeds() } else { corpus.to_vec() };
    let outcome = run_campaign(&config, target, seeds)?;
    write_artifacts(dir, &args.target, &config, &outcome)?;
    let stats = &outcome.stats;
    Ok(TrialResult {
        trial,
        rng_seed,
        executions_to_crash: outcome.crash.as_ref().map(|c| c.executions),
        bug_id: outcome.crash.as_ref().map(|c| c.bug_id.clone()),
        executions: stats.executions,
        features: stats.features,
        stt_nodes: stats.stt_nodes,
        transition_coverage: stats.transition_coverage,
    })
}

fn summary_csv(results: &[TrialResult]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.rng_seed,
            r.executions_to_crash.map_or("inf".into(), |e| e.to_string()),
            r.bug_id.as_deref().unwrap_or(""),
            r.executions,
            r.features,
            r.stt_nodes,
            r.transition_coverage
        ));
    }
    let column = |f: &dyn Fn(&TrialResult) -> f64| {
        format_number(median(&results.iter().map(f).collect::<Vec<_>>()))
    };
    out.push_str(&format!(
        "median,,{},,{},{},{},{}\n",
        column(&|r| r.executions_to_crash.map_or(f64::INFINITY, |e| e as f64)),
        column(&|r| r.executions as f64),
        column(&|r| r.features as f64),
        column(&|r| r.stt_nodes as f64),
        column(&|r| r.transition_coverage as f64),
    ));
    out
}

pub fn cmd_fuzz(args: &FuzzArgs) -> Result<i32> {
    targets::create(&args.target)?;
    args.config(args.rng)?;
    if args.trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let corpus = match args.corpus_dir() {
        Some(dir) => {
            let inputs = read_inputs(&dir)?;
            if inputs.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            inputs
        }
        None => Vec::new(),
    };
    ensure_fresh_dir(&args.output, args.append)?;

    let results: Vec<TrialResult> = if args.trials == 1 {
        vec![run_trial(args, 0, &corpus, &args.output)?]
    } else {
        (0..args.trials)
            .into_par_iter()
            .map(|trial| {
                let dir = args.output.join(format!("trial-{trial:03}"));
                ensure_fresh_dir(&dir, args.append)?;
                run_trial(args, trial, &corpus, &dir)
            })
            .collect::<Result<_>>()?
    };
    if args.trials > 1 {
        write(&args.output.join("summary.csv"), summary_csv(&results))?;
    }
    for r in &results {
        match (&r.bug_id, r.executions_to_crash) {
            (Some(bug), Some(at)) => println!("trial {}: crash {bug} after {at} executions", r.trial),
            _ => println!(
                "trial {}: no crash in {} executions, transition coverage {}",
                r.trial, r.executions, r.transition_coverage
            ),
        }
    }
    let crashed = results.iter().any(|r| r.bug_id.is_some());
    Ok(if crashed { EXIT_CRASH } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_parsing() {
        assert_eq!(parse_interval("500"), Ok(StatsInterval::Executions(500)));
        assert_eq!(parse_interval("1.5s"), Ok(StatsInterval::Seconds(1.5)));
        assert!(parse_interval("0").is_err());
        assert!(parse_interval("fast").is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert_eq!(format_number(2.5), "2.5");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }
}
