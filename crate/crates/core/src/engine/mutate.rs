//! Byte-level mutators stacked in havoc style.

use rand::seq::SliceRandom;
use rand::Rng;

use super::MutationRange;

/// Boundary values written by the interesting-value mutator.
pub const INTERESTING_BYTES: [u8; 9] = [0x80, 0xff, 0, 1, 16, 32, 64, 100, 127];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOp {
    FlipBit,
    SetByte,
    Interesting,
    Insert,
    Delete,
    Duplicate,
    Splice,
}

impl MutationOp {
    pub const ALL: [MutationOp; 7] = [
        MutationOp::FlipBit,
        MutationOp::SetByte,
        MutationOp::Interesting,
        MutationOp::Insert,
        MutationOp::Delete,
        MutationOp::Duplicate,
        MutationOp::Splice,
    ];

    /// Ops that overwrite bytes in place without changing the length.
    pub const SUBSTITUTIONS: [MutationOp; 3] = [
        MutationOp::FlipBit,
        MutationOp::SetByte,
        MutationOp::Interesting,
    ];
}

#[derive(Debug, Clone)]
pub struct Mutator {
    ops: Vec<MutationOp>,
    max_len: usize,
    /// Up to `2^max_stack_log` ops are applied per mutation.
    max_stack_log: u32,
}

impl Mutator {
    pub fn new(max_len: usize) -> Self {
        Self::with_ops(max_len, &MutationOp::ALL)
    }

    pub fn with_ops(max_len: usize, ops: &[MutationOp]) -> Self {
        assert!(!ops.is_empty(), "at least one mutation op is required");
        Mutator {
            ops: ops.to_vec(),
            max_len: max_len.max(1),
            max_stack_log: 3,
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Applies a random stack of ops to a copy of `data`. Positions are
    /// drawn from `range` whenever it has one inside the current input.
    /// `splice_with` is another corpus input for the splice op.
    pub fn mutate<R: Rng + ?Sized>(
        &self,
        data: &[u8],
        range: &MutationRange,
        splice_with: Option<&[u8]>,
        rng: &mut R,
    ) -> Vec<u8> {
        let mut out = data.to_vec();
        out.truncate(self.max_len);
        let stack = 1usize << rng.gen_range(0..=self.max_stack_log);
        for _ in 0..stack {
            let op = *self.ops.choose(rng).expect("ops is non-empty");
            self.apply(op, &mut out, range, splice_with, rng);
        }
        out
    }

    fn apply<R: Rng + ?Sized>(
        &self,
        op: MutationOp,
        out: &mut Vec<u8>,
        range: &MutationRange,
        splice_with: Option<&[u8]>,
        rng: &mut R,
    ) {
        let room = self.max_len - out.len();
        match op {
            MutationOp::FlipBit => {
                if let Some(p) = pick(range, out.len(), rng) {
                    out[p] ^= 1 << rng.gen_range(0..8);
                }
            }
            MutationOp::SetByte => {
                if let Some(p) = pick(range, out.len(), rng) {
                    out[p] = rng.gen();
                }
            }
            MutationOp::Interesting => {
                if let Some(p) = pick(range, out.len(), rng) {
                    out[p] = *INTERESTING_BYTES.choose(rng).expect("non-empty");
                }
            }
            MutationOp::Insert => {
                if room == 0 {
                    return;
                }
                let n = rng.gen_range(1..=room.min(4));
                let at = pick_gap(range, out.len(), rng);
                let bytes: Vec<u8> = (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            rng.gen()
                        } else {
                            *INTERESTING_BYTES.choose(rng).expect("non-empty")
                        }
                    })
                    .collect();
                out.splice(at..at, bytes);
            }
            MutationOp::Delete => {
                if let Some(p) = pick(range, out.len(), rng) {
                    let n = rng.gen_range(1..=(out.len() - p).min(4));
                    out.drain(p..p + n);
                }
            }
            MutationOp::Duplicate => {
                if out.is_empty() || room == 0 {
                    return;
                }
                let n = rng.gen_range(1..=out.len().min(16).min(room));
                let from = rng.gen_range(0..=out.len() - n);
                let block = out[from..from + n].to_vec();
                let at = pick_gap(range, out.len(), rng);
                out.splice(at..at, block);
            }
            MutationOp::Splice => {
                let Some(other) = splice_with.filter(|o| !o.is_empty()) else {
                    return;
                };
                if room == 0 {
                    return;
                }
                let n = rng.gen_range(1..=other.len().min(16).min(room));
                let from = rng.gen_range(0..=other.len() - n);
                let at = pick_gap(range, out.len(), rng);
                out.splice(at..at, other[from..from + n].iter().copied());
            }
        }
    }
}

/// An insertion point in `0..=len`: just before or just after a range byte
/// when the range has one inside the input.
fn pick_gap<R: Rng + ?Sized>(range: &MutationRange, len: usize, rng: &mut R) -> usize {
    match range {
        MutationRange::Bytes(_) if len > 0 => {
            pick(range, len, rng).expect("input is non-empty") + rng.gen_range(0..=1)
        }
        _ => rng.gen_range(0..=len),
    }
}

/// A position below `bound`, from the range when it has one there.
fn pick<R: Rng + ?Sized>(range: &MutationRange, bound: usize, rng: &mut R) -> Option<usize> {
    if bound == 0 {
        return None;
    }
    if let MutationRange::Bytes(bytes) = range {
        let usable = bytes.partition_point(|&p| p < bound);
        if usable > 0 {
            return Some(bytes[rng.gen_range(0..usable)]);
        }
    }
    Some(rng.gen_range(0..bound))
}
