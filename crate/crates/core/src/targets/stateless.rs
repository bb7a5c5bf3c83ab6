//! A record parser whose bug sits in front of any state handling: inputs
//! starting with a 4-byte magic are copied into a fixed buffer without a
//! bounds check. The magic is compared one byte at a time, so each matched
//! byte is a separate coverage feature.
//!
//! Everything else is parsed as framed records: 1 HEADER, 2 RECORD, 3 END.

use super::wire::{self, messages};
use super::{
    BugClass, Outcome, PlantedBug, Probe, ReferenceMachine, StateVarSpec, Target,
    TargetDescriptor,
};

pub const BUG_ID: &str = "parse-oob";
pub const MAGIC: [u8; 4] = *b"FUZ!";

pub const HEADER: u8 = 1;
pub const RECORD: u8 = 2;
pub const END: u8 = 3;

const READER_STATE: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i64)]
enum ReaderState {
    Header = 0,
    Records = 1,
    Done = 2,
}

static DESCRIPTOR: TargetDescriptor = TargetDescriptor {
    name: "stateless_parser",
    state_variables: &[StateVarSpec {
        name: "reader->state",
        constants: &[("READ_HEADER", 0), ("READ_RECORDS", 1), ("READ_DONE", 2)],
    }],
    planted_bugs: &[PlantedBug {
        id: BUG_ID,
        class: BugClass::Stateless,
    }],
    feature_count: FEATURE_COUNT,
};

const F_MAGIC_1: u32 = 0;
const F_MAGIC_2: u32 = 1;
const F_MAGIC_3: u32 = 2;
const F_HEADER: u32 = 3;
const F_RECORD: u32 = 4;
const F_RECORD_EMPTY: u32 = 5;
const F_END: u32 = 6;
const F_OUT_OF_ORDER: u32 = 7;
const F_TRUNCATED: u32 = 8;
const F_UNKNOWN: u32 = 9;
const FEATURE_COUNT: u32 = 10;

#[derive(Debug, Default)]
pub struct StatelessParser;

impl StatelessParser {
    pub fn new() -> Self {
        StatelessParser
    }
}

impl Target for StatelessParser {
    fn descriptor(&self) -> &'static TargetDescriptor {
        &DESCRIPTOR
    }

    fn execute(&mut self, input: &[u8], probe: &mut Probe<'_>) -> Outcome {
        if input.first() == Some(&MAGIC[0]) {
            probe.cover(F_MAGIC_1);
            if input.get(1) == Some(&MAGIC[1]) {
                probe.cover(F_MAGIC_2);
                if input.get(2) == Some(&MAGIC[2]) {
                    probe.cover(F_MAGIC_3);
                    if input.get(3) == Some(&MAGIC[3]) {
                        return Outcome::Crash(BUG_ID);
                    }
                }
            }
        }

        let mut state = ReaderState::Header;
        for message in messages(input) {
            let Ok(message) = message else {
                probe.cover(F_TRUNCATED);
                return Outcome::Reject;
            };
            match (message.kind, state) {
                (HEADER, ReaderState::Header) => {
                    probe.cover(F_HEADER);
                    probe.state(READER_STATE, ReaderState::Records as i64);
                    state = ReaderState::Records;
                }
                (RECORD, ReaderState::Records) => probe.cover(if message.payload.is_empty() {
                    F_RECORD_EMPTY
                } else {
                    F_RECORD
                }),
                (END, ReaderState::Records) => {
                    probe.cover(F_END);
                    probe.state(READER_STATE, ReaderState::Done as i64);
                    state = ReaderState::Done;
                }
                (HEADER | RECORD | END, _) => {
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

    fn reset(&mut self) {}

    fn seeds(&self) -> Vec<Vec<u8>> {
        vec![wire::concat([
            wire::encode(HEADER, b"v1"),
            wire::encode(RECORD, b"abc"),
            wire::encode(END, b""),
        ])]
    }

    fn reference_machine(&self) -> ReferenceMachine {
        let s = |r: ReaderState| (READER_STATE, r as i64);
        ReferenceMachine::build(
            &DESCRIPTOR,
            &[s(ReaderState::Records)],
            &[(s(ReaderState::Records), s(ReaderState::Done))],
        )
    }

    fn alphabet(&self) -> Vec<Vec<u8>> {
        vec![
            wire::encode(HEADER, b""),
            wire::encode(RECORD, b"r"),
            wire::encode(END, b""),
            MAGIC.to_vec(),
        ]
    }

    fn enumeration_depth(&self) -> usize {
        3
    }
}
