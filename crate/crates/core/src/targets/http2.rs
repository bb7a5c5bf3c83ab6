//! A single-connection HTTP/2 server reduced to the stream state machine.
//!
//! Streams move through the eight states H2O uses. A request body chunk is
//! only handled when a DATA frame arrives while the stream is receiving the
//! body, which in turn requires a HEADERS frame without END_STREAM first.
//! The body-chunk handler carries the planted bug.
//!
//! Frames use the shared [`wire`](super::wire) framing:
//!
//! | type | frame         | payload                                     |
//! |------|---------------|---------------------------------------------|
//! | 0x00 | DATA          | flags, pad length, body, padding            |
//! | 0x01 | HEADERS       | flags, method (`G`/`P`/`H`), path (`/...`)  |
//! | 0x02 | PRIORITY      | 5 bytes                                     |
//! | 0x03 | RST_STREAM    | anything                                    |
//! | 0x06 | PING          | 8 bytes                                     |
//! | 0x08 | WINDOW_UPDATE | 1-byte increment                            |
//!
//! Bit 0 of the flags byte is END_STREAM.

use super::wire::{self, messages};
use super::{
    BugClass, Outcome, PlantedBug, Probe, ReferenceMachine, StateVarSpec, Target,
    TargetDescriptor,
};

pub const BUG_ID: &str = "h2-order";

const STREAM_STATE: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i64)]
pub enum StreamState {
    Idle = 0,
    RecvHeaders = 1,
    RecvBody = 2,
    ReqPending = 3,
    SendHeaders = 4,
    SendBody = 5,
    SendBodyIsFinal = 6,
    EndStream = 7,
}

static DESCRIPTOR: TargetDescriptor = TargetDescriptor {
    name: "mini_http2",
    state_variables: &[StateVarSpec {
        name: "stream->state",
        constants: &[
            ("H2O_HTTP2_STREAM_STATE_IDLE", 0),
            ("H2O_HTTP2_STREAM_STATE_RECV_HEADERS", 1),
            ("H2O_HTTP2_STREAM_STATE_RECV_BODY", 2),
            ("H2O_HTTP2_STREAM_STATE_REQ_PENDING", 3),
            ("H2O_HTTP2_STREAM_STATE_SEND_HEADERS", 4),
            ("H2O_HTTP2_STREAM_STATE_SEND_BODY", 5),
            ("H2O_HTTP2_STREAM_STATE_SEND_BODY_IS_FINAL", 6),
            ("H2O_HTTP2_STREAM_STATE_END_STREAM", 7),
        ],
    }],
    planted_bugs: &[PlantedBug {
        id: BUG_ID,
        class: BugClass::ExplicitState,
    }],
    feature_count: FEATURE_COUNT,
};

pub const FRAME_DATA: u8 = 0x00;
pub const FRAME_HEADERS: u8 = 0x01;
pub const FRAME_PRIORITY: u8 = 0x02;
pub const FRAME_RST_STREAM: u8 = 0x03;
pub const FRAME_PING: u8 = 0x06;
pub const FRAME_WINDOW_UPDATE: u8 = 0x08;

const FLAG_END_STREAM: u8 = 0x01;
const INITIAL_WINDOW: u32 = 4;

// Coverage features.
const F_DATA: u32 = 0;
const F_HEADERS: u32 = 1;
const F_PRIORITY: u32 = 2;
const F_RST: u32 = 3;
const F_PING: u32 = 4;
const F_WINDOW_UPDATE: u32 = 5;
const F_TRUNCATED: u32 = 6;
const F_UNKNOWN_TYPE: u32 = 7;
const F_HEADERS_SHORT: u32 = 8;
const F_BAD_METHOD: u32 = 9;
const F_BAD_PATH: u32 = 10;
const F_HEADERS_OK: u32 = 11;
const F_HEADERS_BUSY: u32 = 12;
const F_DATA_BODY: u32 = 13;
const F_METHOD_GET: u32 = 14;
const F_METHOD_POST: u32 = 15;
const F_METHOD_HEAD: u32 = 16;
const F_RESPONSE: u32 = 17;
const F_BODY_SENT: u32 = 18;
const F_BODY_BLOCKED: u32 = 19;
const F_WINDOW_BAD: u32 = 20;
const F_WINDOW_ZERO: u32 = 21;
const F_BODY_FLUSHED: u32 = 22;
const F_BODY_PARTIAL: u32 = 23;
const F_DATA_UNEXPECTED: u32 = 24;
const F_DATA_SHORT: u32 = 25;
const F_DATA_BAD_PAD: u32 = 26;
const F_DATA_EMPTY: u32 = 27;
const F_DATA_END: u32 = 28;
const F_RST_ACTIVE: u32 = 29;
const F_RST_IDLE: u32 = 30;
const F_PRIORITY_OK: u32 = 31;
const F_PRIORITY_BAD: u32 = 32;
const F_PING_OK: u32 = 33;
const F_PING_BAD: u32 = 34;
const FEATURE_COUNT: u32 = 35;

#[derive(Debug)]
struct Stream {
    state: StreamState,
    // Response bytes still waiting for flow-control window.
    pending: u32,
}

#[derive(Debug)]
struct Connection {
    stream: Option<Stream>,
    window: u32,
}

#[derive(Debug, Default)]
pub struct MiniHttp2;

impl MiniHttp2 {
    pub fn new() -> Self {
        MiniHttp2
    }
}

fn is_open(stream: &Option<Stream>) -> bool {
    stream
        .as_ref()
        .is_some_and(|s| s.state != StreamState::EndStream)
}

impl Connection {
    fn on_headers(&mut self, payload: &[u8], probe: &mut Probe<'_>) {
        probe.cover(F_HEADERS);
        if is_open(&self.stream) {
            // HEADERS for the open stream are not handled.
            probe.cover(F_HEADERS_BUSY);
            return;
        }

        probe.state(STREAM_STATE, StreamState::Idle as i64);
        let stream = self.stream.insert(Stream {
            state: StreamState::Idle,
            pending: 0,
        });
        let &[flags, method, path, ..] = payload else {
            probe.cover(F_HEADERS_SHORT);
            probe.state(STREAM_STATE, StreamState::EndStream as i64);
            stream.state = StreamState::EndStream;
            return;
        };
        let response_len = match method {
            b'G' => {
                probe.cover(F_METHOD_GET);
                8
            }
            b'P' => {
                probe.cover(F_METHOD_POST);
                2
            }
            b'H' => {
                probe.cover(F_METHOD_HEAD);
                0
            }
            _ => {
                probe.cover(F_BAD_METHOD);
                probe.state(STREAM_STATE, StreamState::EndStream as i64);
                stream.state = StreamState::EndStream;
                return;
            }
        };
        if path != b'/' {
            probe.cover(F_BAD_PATH);
            probe.state(STREAM_STATE, StreamState::EndStream as i64);
            stream.state = StreamState::EndStream;
            return;
        }
        probe.cover(F_HEADERS_OK);
        stream.pending = response_len;
        probe.state(STREAM_STATE, StreamState::RecvHeaders as i64);
        stream.state = StreamState::RecvHeaders;
        // Computed without a branch in the original server, so no feature.
        let next = [StreamState::RecvBody, StreamState::ReqPending][(flags & FLAG_END_STREAM) as usize];
        probe.state(STREAM_STATE, next as i64);
        stream.state = next;
        if next == StreamState::ReqPending {
            self.start_response(probe);
        }
    }

    fn start_response(&mut self, probe: &mut Probe<'_>) {
        let stream = self.stream.as_mut().expect("response needs a stream");
        probe.cover(F_RESPONSE);
        probe.state(STREAM_STATE, StreamState::SendHeaders as i64);
        stream.state = StreamState::SendHeaders;
        probe.state(STREAM_STATE, StreamState::SendBody as i64);
        stream.state = StreamState::SendBody;
        if stream.pending <= self.window {
            probe.cover(F_BODY_SENT);
            self.window -= stream.pending;
            stream.pending = 0;
            probe.state(STREAM_STATE, StreamState::EndStream as i64);
            stream.state = StreamState::EndStream;
        } else {
            probe.cover(F_BODY_BLOCKED);
            stream.pending -= self.window;
            self.window = 0;
        }
    }

    fn on_window_update(&mut self, payload: &[u8], probe: &mut Probe<'_>) {
        probe.cover(F_WINDOW_UPDATE);
        let &[increment] = payload else {
            probe.cover(F_WINDOW_BAD);
            return;
        };
        if increment == 0 {
            probe.cover(F_WINDOW_ZERO);
            return;
        }
        self.window += u32::from(increment);
        let Some(stream) = self
            .stream
            .as_mut()
            .filter(|s| s.state == StreamState::SendBody)
        else {
            return;
        };
        if stream.pending <= self.window {
            probe.cover(F_BODY_FLUSHED);
            self.window -= stream.pending;
            stream.pending = 0;
            probe.state(STREAM_STATE, StreamState::SendBodyIsFinal as i64);
            stream.state = StreamState::SendBodyIsFinal;
            probe.state(STREAM_STATE, StreamState::EndStream as i64);
            stream.state = StreamState::EndStream;
        } else {
            probe.cover(F_BODY_PARTIAL);
            stream.pending -= self.window;
            self.window = 0;
        }
    }

    fn on_data(&mut self, payload: &[u8], probe: &mut Probe<'_>) -> Outcome {
        probe.cover(F_DATA);
        // The payload is decoded before the stream is looked up.
        let &[flags, pad, ref rest @ ..] = payload else {
            probe.cover(F_DATA_SHORT);
            return Outcome::Reject;
        };
        if pad as usize > rest.len() {
            probe.cover(F_DATA_BAD_PAD);
            return Outcome::Reject;
        }
        let body = &rest[..rest.len() - pad as usize];
        probe.cover(if body.is_empty() { F_DATA_EMPTY } else { F_DATA_BODY });
        let end_stream = flags & FLAG_END_STREAM != 0;
        if end_stream {
            probe.cover(F_DATA_END);
        }

        let Some(stream) = self
            .stream
            .as_mut()
            .filter(|s| s.state == StreamState::RecvBody)
        else {
            probe.cover(F_DATA_UNEXPECTED);
            return Outcome::Ok;
        };
        if !body.is_empty() {
            // handle_request_body_chunk
            return Outcome::Crash(BUG_ID);
        }
        if end_stream {
            probe.state(STREAM_STATE, StreamState::ReqPending as i64);
            stream.state = StreamState::ReqPending;
            self.start_response(probe);
        }
        Outcome::Ok
    }

    fn on_rst_stream(&mut self, probe: &mut Probe<'_>) {
        probe.cover(F_RST);
        if is_open(&self.stream) {
            probe.cover(F_RST_ACTIVE);
            let stream = self.stream.as_mut().expect("open stream");
            probe.state(STREAM_STATE, StreamState::EndStream as i64);
            stream.state = StreamState::EndStream;
        } else {
            probe.cover(F_RST_IDLE);
        }
    }
}

impl Target for MiniHttp2 {
    fn descriptor(&self) -> &'static TargetDescriptor {
        &DESCRIPTOR
    }

    fn execute(&mut self, input: &[u8], probe: &mut Probe<'_>) -> Outcome {
        let mut conn = Connection {
            stream: None,
            window: INITIAL_WINDOW,
        };
        for frame in messages(input) {
            let Ok(frame) = frame else {
                probe.cover(F_TRUNCATED);
                return Outcome::Reject;
            };
            match frame.kind {
                FRAME_DATA => {
                    if let crash @ Outcome::Crash(_) = conn.on_data(frame.payload, probe) {
                        return crash;
                    }
                }
                FRAME_HEADERS => conn.on_headers(frame.payload, probe),
                FRAME_PRIORITY => {
                    probe.cover(F_PRIORITY);
                    probe.cover(if frame.payload.len() == 5 {
                        F_PRIORITY_OK
                    } else {
                        F_PRIORITY_BAD
                    });
                }
                FRAME_RST_STREAM => conn.on_rst_stream(probe),
                FRAME_PING => {
                    probe.cover(F_PING);
                    probe.cover(if frame.payload.len() == 8 {
                        F_PING_OK
                    } else {
                        F_PING_BAD
                    });
                }
                FRAME_WINDOW_UPDATE => conn.on_window_update(frame.payload, probe),
                _ => {
                    probe.cover(F_UNKNOWN_TYPE);
                    return Outcome::Reject;
                }
            }
        }
        Outcome::Ok
    }

    fn reset(&mut self) {}

    fn seeds(&self) -> Vec<Vec<u8>> {
        vec![
            // Both handlers covered, but in the order that never reaches the
            // request-body handler.
            wire::concat([data(0, b"hi"), headers(FLAG_END_STREAM, b'G')]),
            wire::concat([headers(FLAG_END_STREAM, b'P'), ping()]),
        ]
    }

    fn reference_machine(&self) -> ReferenceMachine {
        use StreamState::*;
        let s = |x: StreamState| (STREAM_STATE, x as i64);
        let edges = [
            (Idle, RecvHeaders),
            (Idle, EndStream),
            (RecvHeaders, RecvBody),
            (RecvHeaders, ReqPending),
            (RecvBody, ReqPending),
            (RecvBody, EndStream),
            (ReqPending, SendHeaders),
            (SendHeaders, SendBody),
            (SendBody, SendBodyIsFinal),
            (SendBody, EndStream),
            (SendBodyIsFinal, EndStream),
            (EndStream, Idle),
        ]
        .map(|(a, b)| (s(a), s(b)));
        ReferenceMachine::build(&DESCRIPTOR, &[s(Idle)], &edges)
    }

    fn alphabet(&self) -> Vec<Vec<u8>> {
        vec![
            headers(FLAG_END_STREAM, b'G'),
            headers(FLAG_END_STREAM, b'P'),
            headers(0, b'G'),
            headers(0, b'X'),
            data(FLAG_END_STREAM, b""),
            wire::encode(FRAME_DATA, &[0]),
            data(0, b"x"),
            wire::encode(FRAME_RST_STREAM, &[]),
            wire::encode(FRAME_WINDOW_UPDATE, &[8]),
        ]
    }

    fn enumeration_depth(&self) -> usize {
        3
    }
}

pub fn headers(flags: u8, method: u8) -> Vec<u8> {
    wire::encode(FRAME_HEADERS, &[flags, method, b'/', b'i'])
}

pub fn data(flags: u8, body: &[u8]) -> Vec<u8> {
    let mut payload = vec![flags, 0];
    payload.extend_from_slice(body);
    wire::encode(FRAME_DATA, &payload)
}

fn ping() -> Vec<u8> {
    wire::encode(FRAME_PING, &[0; 8])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stt::Stt;
    use crate::targets::FeatureTrace;

    fn run(input: &[u8]) -> (Outcome, Vec<i64>, FeatureTrace) {
        let stt = Stt::default();
        let vars = [stt.variable("stream->state")];
        let mut features = FeatureTrace::new();
        stt.begin_execution().unwrap();
        let outcome = MiniHttp2::new().execute(input, &mut Probe::new(&mut features, &stt, &vars));
        let trace = stt.end_execution().unwrap();
        let path = stt.path_id(trace.terminal).0.into_iter().map(|(_, v)| v).collect();
        (outcome, path, features)
    }

    #[test]
    fn headers_then_data_crashes() {
        let input = wire::concat([headers(0, b'P'), data(0, b"body")]);
        let (outcome, path, _) = run(&input);
        assert_eq!(outcome, Outcome::Crash(BUG_ID));
        assert_eq!(path, [0, 1, 2]);
    }

    #[test]
    fn data_then_headers_covers_both_handlers() {
        let input = wire::concat([data(0, b"body"), headers(0, b'P')]);
        let (outcome, path, features) = run(&input);
        assert_eq!(outcome, Outcome::Ok);
        assert!(features.contains(F_DATA) && features.contains(F_HEADERS));
        assert_eq!(path, [0, 1, 2]);
    }

    #[test]
    fn empty_input_stays_idle() {
        let (outcome, path, _) = run(b"");
        assert_eq!(outcome, Outcome::Ok);
        assert!(path.is_empty());
    }

    #[test]
    fn malformed_frames_reject_but_report() {
        let (outcome, _, features) = run(&[FRAME_HEADERS, 9, 1]);
        assert_eq!(outcome, Outcome::Reject);
        assert!(features.contains(F_TRUNCATED));
        let (outcome, _, features) = run(&wire::encode(0x42, b""));
        assert_eq!(outcome, Outcome::Reject);
        assert!(features.contains(F_UNKNOWN_TYPE));
    }

    #[test]
    fn flow_control_walks_every_state() {
        let input = wire::concat([
            headers(FLAG_END_STREAM, b'G'),
            wire::encode(FRAME_WINDOW_UPDATE, &[8]),
        ]);
        let (outcome, path, _) = run(&input);
        assert_eq!(outcome, Outcome::Ok);
        assert_eq!(path, [0, 1, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn seeds_do_not_crash() {
        for seed in MiniHttp2::new().seeds() {
            assert_ne!(run(&seed).0.crash_id(), Some(BUG_ID));
        }
    }
}
