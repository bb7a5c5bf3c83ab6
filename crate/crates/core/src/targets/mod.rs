//! In-process protocol targets with planted bugs.
//!
//! A target consumes one input per execution and reports what it did
//! through a [`Probe`]: coverage features at hand-picked branches and a
//! state-update notification right before every assignment to one of its
//! state variables.

use std::fmt;

use crate::error::{Error, Result};
use crate::stt::{State, StateLabels, Stt, VarId};

pub mod http2;
pub mod leaky;
pub mod rtsp;
pub mod stateless;
pub mod wire;

pub use http2::MiniHttp2;
pub use leaky::LeakyParser;
pub use rtsp::MiniRtsp;
pub use stateless::StatelessParser;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Ok,
    Reject,
    Crash(&'static str),
}

impl Outcome {
    pub fn crash_id(self) -> Option<&'static str> {
        match self {
            Outcome::Crash(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BugClass {
    /// Reached only after a specific sequence of state-variable values.
    ExplicitState,
    /// Reached only through state that survives across executions.
    ImplicitState,
    /// Reachable without any state transition.
    Stateless,
}

impl fmt::Display for BugClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BugClass::ExplicitState => "explicit-state",
            BugClass::ImplicitState => "implicit-state",
            BugClass::Stateless => "stateless",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedBug {
    pub id: &'static str,
    pub class: BugClass,
}

#[derive(Debug, Clone, Copy)]
pub struct StateVarSpec {
    pub name: &'static str,
    pub constants: &'static [(&'static str, i64)],
}

#[derive(Debug, Clone, Copy)]
pub struct TargetDescriptor {
    pub name: &'static str,
    pub state_variables: &'static [StateVarSpec],
    pub planted_bugs: &'static [PlantedBug],
    /// Feature ids are in `0..feature_count`.
    pub feature_count: u32,
}

impl TargetDescriptor {
    pub fn bug(&self, id: &str) -> Option<&PlantedBug> {
        self.planted_bugs.iter().find(|b| b.id == id)
    }

    pub fn labels(&self) -> StateLabels {
        let mut labels = StateLabels::default();
        for var in self.state_variables {
            for &(name, value) in var.constants {
                labels.insert(var.name, value, name);
            }
        }
        labels
    }

    pub fn state(&self, var: usize, value: i64) -> State {
        State::new(self.state_variables[var].name, value)
    }
}

/// Coverage features hit by one execution.
#[derive(Debug, Clone, Default)]
pub struct FeatureTrace {
    bits: Vec<u64>,
    ids: Vec<u32>,
}

impl FeatureTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cover(&mut self, id: u32) {
        let (word, bit) = ((id / 64) as usize, id % 64);
        if word >= self.bits.len() {
            self.bits.resize(word + 1, 0);
        }
        if self.bits[word] & (1 << bit) == 0 {
            self.bits[word] |= 1 << bit;
            self.ids.push(id);
        }
    }

    pub fn contains(&self, id: u32) -> bool {
        self.bits
            .get((id / 64) as usize)
            .is_some_and(|w| w & (1 << (id % 64)) != 0)
    }

    /// Features in first-hit order.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn clear(&mut self) {
        for &id in &self.ids {
            self.bits[(id / 64) as usize] = 0;
        }
        self.ids.clear();
    }
}

/// What a target sees of the fuzzer while it runs.
pub struct Probe<'a> {
    features: &'a mut FeatureTrace,
    stt: Option<(&'a Stt, &'a [VarId])>,
}

impl<'a> Probe<'a> {
    /// `vars[i]` is the tree's id for the target's `i`-th state variable.
    pub fn new(features: &'a mut FeatureTrace, stt: &'a Stt, vars: &'a [VarId]) -> Self {
        Probe {
            features,
            stt: Some((stt, vars)),
        }
    }

    /// A probe that only records features.
    pub fn features_only(features: &'a mut FeatureTrace) -> Self {
        Probe {
            features,
            stt: None,
        }
    }

    #[inline]
    pub fn cover(&mut self, feature: u32) {
        self.features.cover(feature);
    }

    /// Notifies the tree that state variable `var` is about to be assigned
    /// `value`.
    #[inline]
    pub fn state(&mut self, var: usize, value: i64) {
        if let Some((stt, vars)) = self.stt {
            stt.on_update_id(vars[var], value)
                .expect("probe used outside an execution");
        }
    }
}

pub trait Target: Send {
    fn descriptor(&self) -> &'static TargetDescriptor;

    fn execute(&mut self, input: &[u8], probe: &mut Probe<'_>) -> Outcome;

    /// Clears state that persists across executions.
    fn reset(&mut self);

    /// Built-in starting corpus.
    fn seeds(&self) -> Vec<Vec<u8>>;

    /// Hand-written state machine: every transition the target can take.
    fn reference_machine(&self) -> ReferenceMachine;

    /// Inputs whose concatenations, up to [`Target::enumeration_depth`]
    /// long, exercise every transition of the reference machine.
    fn alphabet(&self) -> Vec<Vec<u8>>;

    fn enumeration_depth(&self) -> usize;
}

/// Expected compaction of a target's tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferenceMachine {
    pub states: std::collections::BTreeSet<State>,
    pub initial: std::collections::BTreeSet<State>,
    pub edges: std::collections::BTreeSet<(State, State)>,
}

impl ReferenceMachine {
    pub(crate) fn build(
        descriptor: &TargetDescriptor,
        initial: &[(usize, i64)],
        edges: &[((usize, i64), (usize, i64))],
    ) -> Self {
        let s = |(var, value): (usize, i64)| descriptor.state(var, value);
        let mut machine = ReferenceMachine::default();
        for &i in initial {
            machine.initial.insert(s(i));
            machine.states.insert(s(i));
        }
        for &(from, to) in edges {
            machine.states.insert(s(from));
            machine.states.insert(s(to));
            machine.edges.insert((s(from), s(to)));
        }
        machine
    }
}

pub const TARGET_NAMES: [&str; 4] = ["mini_http2", "mini_rtsp", "leaky_parser", "stateless_parser"];

/// Looks a target up by its registry name.
pub fn create(name: &str) -> Result<Box<dyn Target>> {
    Ok(match name {
        "mini_http2" => Box::new(MiniHttp2::new()),
        "mini_rtsp" => Box::new(MiniRtsp::new()),
        "leaky_parser" => Box::new(LeakyParser::new()),
        "stateless_parser" => Box::new(StatelessParser::new()),
        other => return Err(Error::UnknownTarget(other.to_owned())),
    })
}
