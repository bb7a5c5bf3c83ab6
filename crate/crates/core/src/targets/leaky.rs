//! A session parser that leaks one allocation per completed session.
//!
//! Every input that reaches BYE completes a session and bumps a counter
//! kept in the target object, which outlives executions. Unless the
//! fuzzer resets the target between executions, the counter eventually
//! crosses the limit and the next completed session crashes.
//!
//! Messages use the shared framing: 1 HELLO, 2 DATA, 3 BYE.

use super::wire::{self, messages};
use super::{
    BugClass, Outcome, PlantedBug, Probe, ReferenceMachine, StateVarSpec, Target,
    TargetDescriptor,
};

pub const BUG_ID: &str = "leak-overflow";
pub const DEFAULT_THRESHOLD: u32 = 32;

pub const HELLO: u8 = 1;
pub const DATA: u8 = 2;
pub const BYE: u8 = 3;

const PHASE: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i64)]
enum Phase {
    Greeting = 0,
    Transfer = 1,
    Closed = 2,
}

static DESCRIPTOR: TargetDescriptor = TargetDescriptor {
    name: "leaky_parser",
    state_variables: &[StateVarSpec {
        name: "conn->phase",
        constants: &[("PHASE_GREETING", 0), ("PHASE_TRANSFER", 1), ("PHASE_CLOSED", 2)],
    }],
    planted_bugs: &[PlantedBug {
        id: BUG_ID,
        class: BugClass::ImplicitState,
    }],
    feature_count: FEATURE_COUNT,
};

const F_HELLO: u32 = 0;
const F_DATA: u32 = 1;
const F_BYE: u32 = 2;
const F_OUT_OF_ORDER: u32 = 3;
const F_TRUNCATED: u32 = 4;
const F_UNKNOWN: u32 = 5;
const F_DATA_EMPTY: u32 = 6;
const F_SESSION_DONE: u32 = 7;
const FEATURE_COUNT: u32 = 8;

#[derive(Debug)]
pub struct LeakyParser {
    threshold: u32,
    // Survives executions unless `reset` is called.
    leaked_sessions: u32,
}

impl Default for LeakyParser {
    fn default() -> Self {
        Self::new()
    }
}

impl LeakyParser {
    pub fn new() -> Self {
        Self::with_threshold(DEFAULT_THRESHOLD)
    }

    pub fn with_threshold(threshold: u32) -> Self {
        LeakyParser {
            threshold: threshold.max(1),
            leaked_sessions: 0,
        }
    }

    pub fn leaked_sessions(&self) -> u32 {
        self.leaked_sessions
    }
}

impl Target for LeakyParser {
    fn descriptor(&self) -> &'static TargetDescriptor {
        &DESCRIPTOR
    }

    fn execute(&mut self, input: &[u8], probe: &mut Probe<'_>) -> Outcome {
        let mut phase = Phase::Greeting;
        for message in messages(input) {
            let Ok(message) = message else {
                probe.cover(F_TRUNCATED);
                return Outcome::Reject;
            };
            match (message.kind, phase) {
                (HELLO, Phase::Greeting) => {
                    probe.cover(F_HELLO);
                    probe.state(PHASE, Phase::Transfer as i64);
                    phase = Phase::Transfer;
                }
                (DATA, Phase::Transfer) => {
                    probe.cover(if message.payload.is_empty() {
                        F_DATA_EMPTY
                    } else {
                        F_DATA
                    });
                }
                (BYE, Phase::Transfer) => {
                    probe.cover(F_BYE);
                    probe.state(PHASE, Phase::Closed as i64);
                    phase = Phase::Closed;
                    // The session buffer is never released.
                    self.leaked_sessions += 1;
                    if self.leaked_sessions >= self.threshold {
                        return Outcome::Crash(BUG_ID);
                    }
                    probe.cover(F_SESSION_DONE);
                }
                (HELLO | DATA | BYE, _) => {
                    probe.cover(F_OUT_OF_ORDER);
                    return Outcome::Reject;
                }
                _ => {
                    probe.cover(F_UNKNOWN);
                    return Outcome::Reject;
                }
            }
        }
        Outcome::Ok
    }

    fn reset(&mut self) {
        self.leaked_sessions = 0;
    }

    fn seeds(&self) -> Vec<Vec<u8>> {
        vec![valid_session(b"payload")]
    }

    fn reference_machine(&self) -> ReferenceMachine {
        let s = |p: Phase| (PHASE, p as i64);
        ReferenceMachine::build(
            &DESCRIPTOR,
            &[s(Phase::Transfer)],
            &[(s(Phase::Transfer), s(Phase::Closed))],
        )
    }

    fn alphabet(&self) -> Vec<Vec<u8>> {
        vec![
            wire::encode(HELLO, b""),
            wire::encode(DATA, b"x"),
            wire::encode(BYE, b""),
        ]
    }

    fn enumeration_depth(&self) -> usize {
        3
    }
}

/// HELLO, DATA(body), BYE: completes one session.
pub fn valid_session(body: &[u8]) -> Vec<u8> {
    wire::concat([
        wire::encode(HELLO, b""),
        wire::encode(DATA, body),
        wire::encode(BYE, b""),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::FeatureTrace;

    fn exec(target: &mut LeakyParser, input: &[u8]) -> Outcome {
        let mut features = FeatureTrace::new();
        target.execute(input, &mut Probe::features_only(&mut features))
    }

    #[test]
    fn crashes_on_threshold_without_reset() {
        let mut target = LeakyParser::new();
        for i in 1..DEFAULT_THRESHOLD {
            assert_eq!(exec(&mut target, &valid_session(b"a")), Outcome::Ok, "input {i}");
        }
        assert_eq!(exec(&mut target, &valid_session(b"a")), Outcome::Crash(BUG_ID));
    }

    #[test]
    fn reset_between_inputs_never_crashes() {
        let mut target = LeakyParser::new();
        for _ in 0..1000 {
            target.reset();
            assert_eq!(exec(&mut target, &valid_session(b"a")), Outcome::Ok);
        }
    }

    #[test]
    fn invalid_inputs_do_not_leak() {
        let mut target = LeakyParser::new();
        for _ in 0..100 {
            assert_eq!(exec(&mut target, &wire::encode(DATA, b"a")), Outcome::Reject);
        }
        assert_eq!(target.leaked_sessions(), 0);
    }
}
