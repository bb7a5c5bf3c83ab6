//! Framing shared by the message-based targets: one type byte, one length
//! byte, then `length` payload bytes. An input is a concatenation of
//! messages.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message<'a> {
    pub kind: u8,
    pub payload: &'a [u8],
}

/// Iterates over messages; yields `Err(offset)` once for a trailing
/// partial message and then stops.
pub struct Messages<'a> {
    input: &'a [u8],
    at: usize,
}

pub fn messages(input: &[u8]) -> Messages<'_> {
    Messages { input, at: 0 }
}

impl<'a> Iterator for Messages<'a> {
    type Item = Result<Message<'a>, usize>;

    fn next(&mut self) -> Option<Self::Item> {
        let rest = &self.input[self.at..];
        match rest {
            [] => None,
            [kind, len, tail @ ..] if tail.len() >= *len as usize => {
                let payload = &tail[..*len as usize];
                self.at += 2 + payload.len();
                Some(Ok(Message {
                    kind: *kind,
                    payload,
                }))
            }
            _ => {
                let at = self.at;
                self.at = self.input.len();
                Some(Err(at))
            }
        }
    }
}

pub fn encode(kind: u8, payload: &[u8]) -> Vec<u8> {
    assert!(payload.len() <= u8::MAX as usize, "payload too long");
    let mut out = Vec::with_capacity(2 + payload.len());
    out.push(kind);
    out.push(payload.len() as u8);
    out.extend_from_slice(payload);
    out
}

/// Concatenates already-encoded messages.
pub fn concat<I: IntoIterator<Item = Vec<u8>>>(parts: I) -> Vec<u8> {
    parts.into_iter().flatten().collect()
}
