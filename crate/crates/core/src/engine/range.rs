//! Byte ranges that mutation concentrates on after a seed reaches new
//! tree nodes.

use std::collections::BTreeSet;

/// Positions a seed's position-targeted mutators may pick from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MutationRange {
    Whole,
    /// Sorted, distinct, non-empty, all below the seed length.
    Bytes(Vec<usize>),
}

impl MutationRange {
    pub fn is_whole(&self) -> bool {
        matches!(self, MutationRange::Whole)
    }

    /// Normalizes a position set for a seed of length `len`: drops
    /// positions past the end and collapses empty or full sets to
    /// [`MutationRange::Whole`].
    pub fn from_positions(positions: impl IntoIterator<Item = usize>, len: usize) -> Self {
        let set: BTreeSet<usize> = positions.into_iter().filter(|&p| p < len).collect();
        if set.is_empty() || set.len() == len {
            MutationRange::Whole
        } else {
            MutationRange::Bytes(set.into_iter().collect())
        }
    }

    pub fn contains(&self, pos: usize) -> bool {
        match self {
            MutationRange::Whole => true,
            MutationRange::Bytes(b) => b.binary_search(&pos).is_ok(),
        }
    }
}

/// Range for a new corpus entry `child` mutated from `parent`: the
/// positions where the two differ if the child reached new tree nodes,
/// the whole seed otherwise. Positions past the shorter input all differ.
pub fn identify_bytes(parent: &[u8], child: &[u8], new_node_count: usize) -> MutationRange {
    if new_node_count == 0 {
        return MutationRange::Whole;
    }
    let longest = parent.len().max(child.len());
    let differing = (0..longest).filter(|&i| parent.get(i) != child.get(i));
    MutationRange::from_positions(differing, child.len())
}

/// Grows every contiguous run of width `w` by `ceil(w / 2)` adjacent bytes
/// on each side, so a lone byte gains both neighbours and wider runs about
/// double. Repeated calls reach [`MutationRange::Whole`] in a logarithmic
/// number of steps.
pub fn enlarge_range(range: &MutationRange, len: usize) -> MutationRange {
    let MutationRange::Bytes(bytes) = range else {
        return MutationRange::Whole;
    };
    let mut grown = Vec::with_capacity(bytes.len() * 2);
    for (start, end) in runs(bytes) {
        let pad = (end - start).div_ceil(2);
        grown.extend(start.saturating_sub(pad)..end + pad);
    }
    MutationRange::from_positions(grown, len)
}

/// Half-open `[start, end)` runs of consecutive positions.
fn runs(sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &p in sorted {
        match out.last_mut() {
            Some((_, end)) if *end == p => *end += 1,
            _ => out.push((p, p + 1)),
        }
    }
    out
}
