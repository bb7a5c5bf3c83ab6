//! An RTSP-style media session with an MPEG program-stream parser.
//!
//! The session moves between INIT, READY and PLAYING. Starting playback
//! starts the parser at the pack header. SETUP during playback stops the
//! parser but forgets to rewind its byte counter, so the next PLAY parses
//! the pack header at a stale offset and trips an assertion.
//!
//! Messages use the shared framing with these types: 1 OPTIONS,
//! 2 DESCRIBE (non-empty URL), 3 SETUP (track byte 0 or 1), 4 PLAY,
//! 5 PAUSE, 6 TEARDOWN, 7 GET_PARAMETER (keep-alive; pumps the parser).

use super::wire::{self, messages};
use super::{
    BugClass, Outcome, PlantedBug, Probe, ReferenceMachine, StateVarSpec, Target,
    TargetDescriptor,
};

pub const BUG_ID: &str = "rtsp-replay";

const SESSION_STATE: usize = 0;
const PARSER_STATE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i64)]
enum SessionState {
    Init = 0,
    Ready = 1,
    Playing = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i64)]
enum ParseState {
    Idle = 0,
    PackHeader = 1,
    SystemHeader = 2,
    Pes = 3,
}

static DESCRIPTOR: TargetDescriptor = TargetDescriptor {
    name: "mini_rtsp",
    state_variables: &[
        StateVarSpec {
            name: "session->state",
            constants: &[("RTSP_INIT", 0), ("RTSP_READY", 1), ("RTSP_PLAYING", 2)],
        },
        StateVarSpec {
            name: "parser->state",
            constants: &[
                ("PARSING_IDLE", 0),
                ("PARSING_PACK_HEADER", 1),
                ("PARSING_SYSTEM_HEADER", 2),
                ("PARSING_PES", 3),
            ],
        },
    ],
    planted_bugs: &[PlantedBug {
        id: BUG_ID,
        class: BugClass::ExplicitState,
    }],
    feature_count: FEATURE_COUNT,
};

pub const OPTIONS: u8 = 1;
pub const DESCRIBE: u8 = 2;
pub const SETUP: u8 = 3;
pub const PLAY: u8 = 4;
pub const PAUSE: u8 = 5;
pub const TEARDOWN: u8 = 6;
pub const GET_PARAMETER: u8 = 7;

const PACK_HEADER_LEN: u32 = 14;
const SYSTEM_HEADER_LEN: u32 = 12;
const PES_CHUNK_LEN: u32 = 188;

const F_OPTIONS: u32 = 0;
const F_DESCRIBE: u32 = 1;
const F_DESCRIBE_EMPTY: u32 = 2;
const F_SETUP: u32 = 3;
const F_SETUP_BAD_TRACK: u32 = 4;
const F_SETUP_INIT: u32 = 5;
const F_SETUP_READY: u32 = 6;
const F_SETUP_PLAYING: u32 = 7;
const F_STOP_PARSER: u32 = 8;
const F_PLAY: u32 = 9;
const F_PLAY_INIT: u32 = 10;
const F_PLAY_START: u32 = 11;
const F_PLAY_RESUME: u32 = 12;
const F_PLAY_AGAIN: u32 = 13;
const F_PAUSE: u32 = 14;
const F_PAUSE_INIT: u32 = 15;
const F_PAUSE_PLAYING: u32 = 16;
const F_PAUSE_READY: u32 = 17;
const F_TEARDOWN: u32 = 18;
const F_TEARDOWN_INIT: u32 = 19;
const F_TEARDOWN_PARSER: u32 = 20;
const F_GET_PARAMETER: u32 = 21;
const F_PARSE_SYSTEM: u32 = 22;
const F_PARSE_PES: u32 = 23;
const F_PARSE_IDLE: u32 = 24;
const F_TRUNCATED: u32 = 25;
const F_UNKNOWN: u32 = 26;
const FEATURE_COUNT: u32 = 27;

#[derive(Debug)]
struct Parser {
    state: ParseState,
    running: bool,
    bytes_read: u32,
}

#[derive(Debug)]
struct Session {
    state: SessionState,
    parser: Parser,
}

#[derive(Debug, Default)]
pub struct MiniRtsp;

impl MiniRtsp {
    pub fn new() -> Self {
        MiniRtsp
    }
}

impl Session {
    fn setup(&mut self, payload: &[u8], probe: &mut Probe<'_>) -> Outcome {
        probe.cover(F_SETUP);
        if !matches!(payload.first(), Some(0 | 1)) {
            probe.cover(F_SETUP_BAD_TRACK);
            return Outcome::Reject;
        }
        probe.cover(match self.state {
            SessionState::Init => F_SETUP_INIT,
            SessionState::Ready => F_SETUP_READY,
            SessionState::Playing => F_SETUP_PLAYING,
        });
        if self.parser.running {
            // Stops the demuxer; the byte counter is left as is.
            probe.cover(F_STOP_PARSER);
            self.parser.running = false;
        }
        probe.state(SESSION_STATE, SessionState::Ready as i64);
        self.state = SessionState::Ready;
        Outcome::Ok
    }

    fn play(&mut self, probe: &mut Probe<'_>) -> Outcome {
        probe.cover(F_PLAY);
        match self.state {
            SessionState::Init => {
                probe.cover(F_PLAY_INIT);
                Outcome::Reject
            }
            SessionState::Playing => {
                probe.cover(F_PLAY_AGAIN);
                Outcome::Ok
            }
            SessionState::Ready => {
                if self.parser.running {
                    probe.cover(F_PLAY_RESUME);
                } else {
                    probe.cover(F_PLAY_START);
                    probe.state(PARSER_STATE, ParseState::PackHeader as i64);
                    self.parser.state = ParseState::PackHeader;
                    if self.parser.bytes_read != 0 {
                        // assert(bytes_read == 0) in the pack header parser
                        return Outcome::Crash(BUG_ID);
                    }
                    self.parser.bytes_read += PACK_HEADER_LEN;
                    self.parser.running = true;
                }
                probe.state(SESSION_STATE, SessionState::Playing as i64);
                self.state = SessionState::Playing;
                Outcome::Ok
            }
        }
    }

    fn pause(&mut self, probe: &mut Probe<'_>) -> Outcome {
        probe.cover(F_PAUSE);
        match self.state {
            SessionState::Init => {
                probe.cover(F_PAUSE_INIT);
                Outcome::Reject
            }
            SessionState::Ready => {
                probe.cover(F_PAUSE_READY);
                Outcome::Ok
            }
            SessionState::Playing => {
                probe.cover(F_PAUSE_PLAYING);
                probe.state(SESSION_STATE, SessionState::Ready as i64);
                self.state = SessionState::Ready;
                Outcome::Ok
            }
        }
    }

    fn teardown(&mut self, probe: &mut Probe<'_>) -> Outcome {
        probe.cover(F_TEARDOWN);
        if self.state == SessionState::Init {
            probe.cover(F_TEARDOWN_INIT);
            return Outcome::Reject;
        }
        if self.parser.state != ParseState::Idle {
            probe.cover(F_TEARDOWN_PARSER);
            probe.state(PARSER_STATE, ParseState::Idle as i64);
            self.parser.state = ParseState::Idle;
        }
        self.parser.running = false;
        self.parser.bytes_read = 0;
        probe.state(SESSION_STATE, SessionState::Init as i64);
        self.state = SessionState::Init;
        Outcome::Ok
    }

    fn keep_alive(&mut self, probe: &mut Probe<'_>) {
        probe.cover(F_GET_PARAMETER);
        if !self.parser.running || self.state != SessionState::Playing {
            probe.cover(F_PARSE_IDLE);
            return;
        }
        match self.parser.state {
            ParseState::PackHeader => {
                probe.cover(F_PARSE_SYSTEM);
                self.parser.bytes_read += SYSTEM_HEADER_LEN;
                probe.state(PARSER_STATE, ParseState::SystemHeader as i64);
                self.parser.state = ParseState::SystemHeader;
            }
            ParseState::SystemHeader | ParseState::Pes => {
                probe.cover(F_PARSE_PES);
                self.parser.bytes_read += PES_CHUNK_LEN;
                probe.state(PARSER_STATE, ParseState::Pes as i64);
                self.parser.state = ParseState::Pes;
            }
            ParseState::Idle => unreachable!("running parser is never idle"),
        }
    }
}

impl Target for MiniRtsp {
    fn descriptor(&self) -> &'static TargetDescriptor {
        &DESCRIPTOR
    }

    fn execute(&mut self, input: &[u8], probe: &mut Probe<'_>) -> Outcome {
        let mut session = Session {
            state: SessionState::Init,
            parser: Parser {
                state: ParseState::Idle,
                running: false,
                bytes_read: 0,
            },
        };
        for message in messages(input) {
            let Ok(message) = message else {
                probe.cover(F_TRUNCATED);
                return Outcome::Reject;
            };
            let outcome = match message.kind {
                OPTIONS => {
                    probe.cover(F_OPTIONS);
                    Outcome::Ok
                }
                DESCRIBE => {
                    probe.cover(F_DESCRIBE);
                    if message.payload.is_empty() {
                        probe.cover(F_DESCRIBE_EMPTY);
                        Outcome::Reject
                    } else {
                        Outcome::Ok
                    }
                }
                SETUP => session.setup(message.payload, probe),
                PLAY => session.play(probe),
                PAUSE => session.pause(probe),
                TEARDOWN => session.teardown(probe),
                GET_PARAMETER => {
                    session.keep_alive(probe);
                    Outcome::Ok
                }
                _ => {
                    probe.cover(F_UNKNOWN);
                    Outcome::Reject
                }
            };
            if outcome != Outcome::Ok {
                return outcome;
            }
        }
        Outcome::Ok
    }

    fn reset(&mut self) {}

    fn seeds(&self) -> Vec<Vec<u8>> {
        vec![wire::concat([
            command(OPTIONS),
            wire::encode(DESCRIBE, b"rtsp://h/a"),
            setup(0),
            command(PLAY),
            command(TEARDOWN),
        ])]
    }

    fn reference_machine(&self) -> ReferenceMachine {
        let (i, r, p) = (
            (SESSION_STATE, SessionState::Init as i64),
            (SESSION_STATE, SessionState::Ready as i64),
            (SESSION_STATE, SessionState::Playing as i64),
        );
        let (pi, ph, ps, pe) = (
            (PARSER_STATE, ParseState::Idle as i64),
            (PARSER_STATE, ParseState::PackHeader as i64),
            (PARSER_STATE, ParseState::SystemHeader as i64),
            (PARSER_STATE, ParseState::Pes as i64),
        );
        let edges = [
            (r, r),
            (r, ph),
            (r, p),
            (r, pi),
            (r, i),
            (ph, p),
            (p, r),
            (p, ps),
            (p, pe),
            (p, pi),
            (ps, r),
            (ps, pe),
            (ps, pi),
            (pe, pe),
            (pe, r),
            (pe, pi),
            (pi, i),
            (i, r),
        ];
        ReferenceMachine::build(&DESCRIPTOR, &[r], &edges)
    }

    fn alphabet(&self) -> Vec<Vec<u8>> {
        vec![
            setup(0),
            command(PLAY),
            command(PAUSE),
            command(GET_PARAMETER),
            command(TEARDOWN),
        ]
    }

    fn enumeration_depth(&self) -> usize {
        6
    }
}

pub fn command(kind: u8) -> Vec<u8> {
    wire::encode(kind, &[])
}

pub fn setup(track: u8) -> Vec<u8> {
    wire::encode(SETUP, &[track])
}
