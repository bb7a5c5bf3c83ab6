//! The fuzzing loop and its heuristics.
//!
//! A campaign repeatedly picks a corpus seed in proportion to its energy,
//! mutates it, runs the mutant, and keeps it when it reaches a new coverage
//! feature or a new state-transition-tree node. Which of the three
//! heuristics (tree feedback, energy schedule, byte ranges) are active is
//! decided by the [`Variant`].

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::Error;
use crate::stt::{NodeId, PathId, DEFAULT_REPETITION_CAP};

mod campaign;
mod energy;
mod minimize;
mod mutate;
mod range;
mod schedule;

pub use campaign::{
    run_campaign, CampaignOutcome, CampaignStats, CrashReport, ExecResult, Executor, Snapshot,
};
pub use energy::{assign_energy, assign_energy_all, EnergyParams};
pub use minimize::{minimize_history, replay_history, HistoryReplay};
pub use mutate::{Mutator, INTERESTING_BYTES};
pub use range::{enlarge_range, identify_bytes, MutationRange};
pub use schedule::{choose_next, Scheduler};

/// Which heuristics a campaign uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Coverage feedback only.
    Baseline,
    /// Coverage plus new tree nodes as feedback.
    SttOnly,
    /// Tree feedback plus the rare-node and divergence energy schedule.
    SttEnergy,
    /// Everything, including byte-range prioritized mutation.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::SttOnly,
        Variant::SttEnergy,
        Variant::Full,
    ];

    pub fn stt_feedback(self) -> bool {
        self != Variant::Baseline
    }

    pub fn energy_schedule(self) -> bool {
        matches!(self, Variant::SttEnergy | Variant::Full)
    }

    pub fn byte_ranges(self) -> bool {
        self == Variant::Full
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::SttOnly => "stt_only",
            Variant::SttEnergy => "stt_energy",
            Variant::Full => "full",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_owned()))
    }
}

/// How often the campaign records a [`Snapshot`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatsInterval {
    /// Every `n` executions. Snapshots are then reproducible and their
    /// `elapsed` column counts executions.
    Executions(u64),
    /// Every so many seconds of wall-clock time.
    Seconds(f64),
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub variant: Variant,
    /// Executions, including the dry run of the initial corpus.
    pub max_executions: Option<u64>,
    pub max_seconds: Option<f64>,
    pub rng_seed: u64,
    pub repetition_cap: u32,
    /// Reset the target's persistent state before every execution. When
    /// off, implicit state aggregates and every executed input is kept for
    /// crash reproduction.
    pub reset_implicit_state: bool,
    pub stats_interval: StatsInterval,
    /// Upper bound on energy as a multiple of the baseline energy.
    pub energy_cap_factor: u64,
    /// Consecutive uninteresting mutations before a seed's byte range grows.
    pub enlarge_after: u32,
    pub max_len: usize,
    /// Keep fuzzing after a crash instead of returning it.
    pub continue_after_crash: bool,
    /// State variables whose updates are ignored.
    pub blocklist: Vec<String>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            variant: Variant::Full,
            max_executions: Some(100_000),
            max_seconds: None,
            rng_seed: 0,
            repetition_cap: DEFAULT_REPETITION_CAP,
            reset_implicit_state: true,
            stats_interval: StatsInterval::Executions(10_000),
            energy_cap_factor: 10,
            enlarge_after: 64,
            max_len: 128,
            continue_after_crash: false,
            blocklist: Vec::new(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.energy_cap_factor == 0 {
            return Err(Error::Config("energy cap factor must be positive".into()));
        }
        if self.enlarge_after == 0 {
            return Err(Error::Config("enlargement threshold must be positive".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Config("maximum input length must be positive".into()));
        }
        match self.stats_interval {
            StatsInterval::Executions(0) => {
                return Err(Error::Config("stats interval must be positive".into()))
            }
            StatsInterval::Seconds(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(Error::Config("stats interval must be positive".into()))
            }
            _ => {}
        }
        if let Some(s) = self.max_seconds {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config("time budget must be a non-negative number".into()));
            }
        }
        Ok(())
    }
}

/// A corpus member.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedEntry {
    pub data: Vec<u8>,
    pub energy: Ratio<u64>,
    /// Tree node at which this seed's execution ended.
    pub terminal: NodeId,
    pub path: PathId,
    /// Mutations of this seed executed so far.
    pub offspring_total: u64,
    /// Of those, the ones that ended at the same tree node.
    pub offspring_same_path: u64,
    pub mutation_range: MutationRange,
    /// Uninteresting mutations since the last interesting one or the last
    /// enlargement.
    pub stagnation: u32,
}

impl SeedEntry {
    pub fn new(data: Vec<u8>, terminal: NodeId, path: PathId) -> Self {
        SeedEntry {
            data,
            energy: Ratio::from_integer(1),
            terminal,
            path,
            offspring_total: 0,
            offspring_same_path: 0,
            mutation_range: MutationRange::Whole,
            stagnation: 0,
        }
    }
}

/// Whether an execution earns its input a place in the corpus.
pub fn is_interesting(variant: Variant, new_features: usize, new_nodes: usize) -> bool {
    new_features > 0 || (variant.stt_feedback() && new_nodes > 0)
}
