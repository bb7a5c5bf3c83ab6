//! The campaign loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::energy::{assign_energy_all, EnergyParams};
use super::mutate::Mutator;
use super::range::{enlarge_range, identify_bytes, MutationRange};
use super::schedule::Scheduler;
use super::{is_interesting, CampaignConfig, SeedEntry, StatsInterval};
use crate::error::{Error, Result};
use crate::stt::{PathId, Stt, Trace, VarId};
use crate::targets::{BugClass, FeatureTrace, Outcome, Probe, Target, TargetDescriptor};

/// What one execution produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecResult {
    pub outcome: Outcome,
    pub trace: Trace,
    /// Features never seen by earlier executions of this executor.
    pub new_features: usize,
}

/// Runs inputs against one target and accumulates coverage and the tree.
pub struct Executor {
    target: Box<dyn Target>,
    stt: Stt,
    vars: Vec<VarId>,
    scratch: FeatureTrace,
    seen: Vec<bool>,
    feature_total: usize,
    reset_each: bool,
    executions: u64,
}

impl Executor {
    /// With `reset_each`, the target's persistent state is cleared before
    /// every execution.
    pub fn new(
        target: Box<dyn Target>,
        repetition_cap: u32,
        blocklist: &[String],
        reset_each: bool,
    ) -> Result<Self> {
        let descriptor = target.descriptor();
        let names: Vec<&str> = descriptor.state_variables.iter().map(|v| v.name).collect();
        if names.iter().enumerate().any(|(i, n)| names[..i].contains(n)) {
            return Err(Error::TargetInitFailure(format!(
                "{} declares a state variable twice",
                descriptor.name
            )));
        }
        let stt = Stt::with_blocklist(repetition_cap, blocklist.iter().cloned());
        let vars = names.iter().map(|n| stt.variable(n)).collect();
        let mut target = target;
        target.reset();
        Ok(Executor {
            target,
            stt,
            vars,
            scratch: FeatureTrace::new(),
            seen: vec![false; descriptor.feature_count as usize],
            feature_total: 0,
            reset_each,
            executions: 0,
        })
    }

    pub fn execute(&mut self, input: &[u8]) -> ExecResult {
        if self.reset_each {
            self.target.reset();
        }
        self.scratch.clear();
        self.stt
            .begin_execution()
            .expect("executor runs one input at a time");
        let outcome = {
            let mut probe = Probe::new(&mut self.scratch, &self.stt, &self.vars);
            self.target.execute(input, &mut probe)
        };
        let trace = self.stt.end_execution().expect("execution was begun");
        self.executions += 1;

        let mut new_features = 0;
        for &id in self.scratch.ids() {
            let id = id as usize;
            if id >= self.seen.len() {
                self.seen.resize(id + 1, false);
            }
            if !self.seen[id] {
                self.seen[id] = true;
                new_features += 1;
            }
        }
        self.feature_total += new_features;
        ExecResult {
            outcome,
            trace,
            new_features,
        }
    }

    pub fn stt(&self) -> &Stt {
        &self.stt
    }

    pub fn into_stt(self) -> Stt {
        self.stt
    }

    pub fn target(&self) -> &dyn Target {
        self.target.as_ref()
    }

    /// Features hit by the most recent execution, in first-hit order.
    pub fn last_features(&self) -> &[u32] {
        self.scratch.ids()
    }

    /// Distinct features hit so far.
    pub fn feature_count(&self) -> usize {
        self.feature_total
    }

    pub fn executions(&self) -> u64 {
        self.executions
    }
}

/// One row of the stats stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    /// Executions when snapshots are taken by execution count, seconds
    /// otherwise.
    pub elapsed: f64,
    pub executions: u64,
    pub features: usize,
    pub stt_nodes: usize,
    pub transition_coverage: usize,
    pub corpus_size: usize,
    pub crashes: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CampaignStats {
    pub snapshots: Vec<Snapshot>,
    pub executions: u64,
    pub features: usize,
    pub stt_nodes: usize,
    pub transition_coverage: usize,
    pub corpus_size: usize,
    pub crashes: u64,
    /// Execution count at which the first crash happened.
    pub first_crash_execution: Option<u64>,
    pub wall_seconds: f64,
}

impl CampaignStats {
    pub const CSV_HEADER: &'static str =
        "elapsed,executions,features,stt_nodes,transition_coverage,corpus_size,crashes";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.snapshots {
            let elapsed = if s.elapsed.fract() == 0.0 {
                format!("{}", s.elapsed as u64)
            } else {
                format!("{:.3}", s.elapsed)
            };
            out.push_str(&format!(
                "{elapsed},{},{},{},{},{},{}\n",
                s.executions, s.features, s.stt_nodes, s.transition_coverage, s.corpus_size, s.crashes
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrashReport {
    pub bug_id: String,
    pub class: Option<BugClass>,
    #[serde(skip)]
    pub crashing_input: Vec<u8>,
    /// Every input executed up to and including the crashing one when
    /// implicit state is kept; just the crashing input otherwise.
    #[serde(skip)]
    pub input_history: Vec<Vec<u8>>,
    pub stt_path: PathId,
    pub features: Vec<u32>,
    /// Executions up to and including the crashing one.
    pub executions: u64,
}

pub struct CampaignOutcome {
    pub stats: CampaignStats,
    pub crash: Option<CrashReport>,
    pub stt: Stt,
    pub corpus: Vec<SeedEntry>,
}

struct Budget {
    max_executions: Option<u64>,
    deadline: Option<f64>,
    start: Instant,
}

impl Budget {
    fn exhausted(&self, executions: u64) -> bool {
        self.max_executions.is_some_and(|m| executions >= m)
            || self
                .deadline
                .is_some_and(|d| self.start.elapsed().as_secs_f64() >= d)
    }
}

struct Recorder {
    interval: StatsInterval,
    next: f64,
    stats: CampaignStats,
    start: Instant,
}

impl Recorder {
    fn due(&self, executions: u64) -> Option<f64> {
        let now = match self.interval {
            StatsInterval::Executions(_) => executions as f64,
            StatsInterval::Seconds(_) => self.start.elapsed().as_secs_f64(),
        };
        (now >= self.next).then_some(now)
    }

    fn record(&mut self, elapsed: f64, exec: &Executor, corpus: usize) {
        let step = match self.interval {
            StatsInterval::Executions(n) => n as f64,
            StatsInterval::Seconds(s) => s,
        };
        while self.next <= elapsed {
            self.next += step;
        }
        let view = exec.stt().view();
        self.stats.snapshots.push(Snapshot {
            elapsed,
            executions: exec.executions(),
            features: exec.feature_count(),
            stt_nodes: view.node_count(),
            transition_coverage: view.transition_coverage(),
            corpus_size: corpus,
            crashes: self.stats.crashes,
        });
    }

    fn maybe_record(&mut self, exec: &Executor, corpus: usize) {
        self.stats.corpus_size = corpus;
        if let Some(now) = self.due(exec.executions()) {
            self.record(now, exec, corpus);
        }
    }

    fn now(&self, exec: &Executor) -> f64 {
        match self.interval {
            StatsInterval::Executions(_) => exec.executions() as f64,
            StatsInterval::Seconds(_) => self.start.elapsed().as_secs_f64(),
        }
    }

    fn record_now(&mut self, exec: &Executor, corpus: usize) {
        let now = self.now(exec);
        self.record(now, exec, corpus);
    }

    fn finish(&mut self, exec: &Executor, corpus: usize) {
        let elapsed = self.now(exec);
        let last = self.stats.snapshots.last().map(|s| (s.executions, s.crashes));
        if last != Some((exec.executions(), self.stats.crashes)) {
            self.record(elapsed, exec, corpus);
        }
        let view = exec.stt().view();
        let stats = &mut self.stats;
        stats.executions = exec.executions();
        stats.features = exec.feature_count();
        stats.stt_nodes = view.node_count();
        stats.transition_coverage = view.transition_coverage();
        stats.corpus_size = corpus;
        stats.wall_seconds = self.start.elapsed().as_secs_f64();
    }
}

struct Crashes {
    first: Option<CrashReport>,
    descriptor: &'static TargetDescriptor,
    keep_history: bool,
    stop_on_crash: bool,
}

impl Crashes {
    /// Counts a crash and reports the first one. Returns true when the
    /// campaign should stop.
    fn record(
        &mut self,
        bug: &'static str,
        input: &[u8],
        result: &ExecResult,
        exec: &Executor,
        history: &mut Vec<Vec<u8>>,
        recorder: &mut Recorder,
    ) -> bool {
        recorder.stats.crashes += 1;
        if self.first.is_none() {
            let input_history = if self.keep_history {
                std::mem::take(history)
            } else {
                vec![input.to_vec()]
            };
            recorder.stats.first_crash_execution = Some(exec.executions());
            let corpus_size = recorder.stats.corpus_size;
            recorder.record_now(exec, corpus_size);
            self.first = Some(CrashReport {
                bug_id: bug.to_owned(),
                class: self.descriptor.bug(bug).map(|b| b.class),
                crashing_input: input.to_vec(),
                input_history,
                stt_path: exec.stt().path_id(result.trace.terminal),
                features: exec.last_features().to_vec(),
                executions: exec.executions(),
            });
        }
        self.stop_on_crash
    }
}

/// Fuzzes `target` starting from `initial_corpus` until the budget runs
/// out or, unless `continue_after_crash` is set, the first crash.
///
/// The initial inputs are executed first and count against the budget.
pub fn run_campaign(
    config: &CampaignConfig,
    target: Box<dyn Target>,
    initial_corpus: Vec<Vec<u8>>,
) -> Result<CampaignOutcome> {
    config.validate()?;
    if initial_corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let variant = config.variant;
    let descriptor = target.descriptor();
    let mut exec = Executor::new(
        target,
        config.repetition_cap,
        &config.blocklist,
        config.reset_implicit_state,
    )?;
    let start = Instant::now();
    let budget = Budget {
        max_executions: config.max_executions,
        deadline: config.max_seconds,
        start,
    };
    let mut recorder = Recorder {
        interval: config.stats_interval,
        next: match config.stats_interval {
            StatsInterval::Executions(n) => n as f64,
            StatsInterval::Seconds(s) => s,
        },
        stats: CampaignStats::default(),
        start,
    };
    let keep_history = !config.reset_implicit_state;
    let mut history: Vec<Vec<u8>> = Vec::new();
    let mut crashes = Crashes {
        first: None,
        descriptor,
        keep_history,
        stop_on_crash: !config.continue_after_crash,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mutator = Mutator::new(config.max_len);
    let energy = EnergyParams {
        cap_factor: config.energy_cap_factor,
        ..EnergyParams::default()
    };
    let mut corpus: Vec<SeedEntry> = Vec::new();
    let mut scheduler = Scheduler::default();

    let mut stop = false;
    for input in initial_corpus {
        if budget.exhausted(exec.executions()) {
            stop = true;
            break;
        }
        let result = exec.execute(&input);
        if keep_history && crashes.first.is_none() {
            history.push(input.clone());
        }
        if let Outcome::Crash(bug) = result.outcome {
            if crashes.record(bug, &input, &result, &exec, &mut history, &mut recorder) {
                stop = true;
                break;
            }
        } else {
            let path = exec.stt().path_id(result.trace.terminal);
            corpus.push(SeedEntry::new(input, result.trace.terminal, path));
        }
        recorder.maybe_record(&exec, corpus.len());
    }

    if variant.energy_schedule() {
        assign_energy_all(&mut corpus, &exec.stt().view(), energy);
    }
    scheduler.rebuild(&corpus);

    while !stop && !corpus.is_empty() && !budget.exhausted(exec.executions()) {
        let parent = scheduler.choose(&mut rng);
        let other = rng.gen_range(0..corpus.len());
        let range = if variant.byte_ranges() {
            &corpus[parent].mutation_range
        } else {
            &MutationRange::Whole
        };
        let splice = (other != parent).then(|| corpus[other].data.as_slice());
        let child = mutator.mutate(&corpus[parent].data, range, splice, &mut rng);

        let result = exec.execute(&child);
        if keep_history && crashes.first.is_none() {
            history.push(child.clone());
        }
        let seed = &mut corpus[parent];
        seed.offspring_total += 1;
        if result.trace.terminal == seed.terminal {
            seed.offspring_same_path += 1;
        }

        if let Outcome::Crash(bug) = result.outcome {
            stop = crashes.record(bug, &child, &result, &exec, &mut history, &mut recorder);
        } else if is_interesting(variant, result.new_features, result.trace.new_nodes) {
            seed.stagnation = 0;
            let mutation_range = if variant.byte_ranges() {
                identify_bytes(&seed.data, &child, result.trace.new_nodes)
            } else {
                MutationRange::Whole
            };
            let path = exec.stt().path_id(result.trace.terminal);
            let mut entry = SeedEntry::new(child, result.trace.terminal, path);
            entry.mutation_range = mutation_range;
            corpus.push(entry);
            if variant.energy_schedule() {
                assign_energy_all(&mut corpus, &exec.stt().view(), energy);
            }
            scheduler.rebuild(&corpus);
        } else if variant.byte_ranges() && !seed.mutation_range.is_whole() {
            seed.stagnation += 1;
            if seed.stagnation >= config.enlarge_after {
                seed.mutation_range = enlarge_range(&seed.mutation_range, seed.data.len());
                seed.stagnation = 0;
            }
        }
        recorder.maybe_record(&exec, corpus.len());
    }

    recorder.finish(&exec, corpus.len());
    Ok(CampaignOutcome {
        stats: recorder.stats,
        crash: crashes.first,
        stt: exec.into_stt(),
        corpus,
    })
}
