//! Seed selection in proportion to energy.

use num_traits::ToPrimitive;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::SeedEntry;

fn weight(seed: &SeedEntry) -> f64 {
    seed.energy.to_f64().unwrap_or(0.0)
}

/// Picks the index of a corpus seed with probability proportional to its
/// energy. Falls back to uniform choice when every energy is zero.
///
/// # Panics
///
/// If the corpus is empty.
pub fn choose_next<R: Rng + ?Sized>(corpus: &[SeedEntry], rng: &mut R) -> usize {
    assert!(!corpus.is_empty(), "cannot choose from an empty corpus");
    match WeightedIndex::new(corpus.iter().map(weight)) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.gen_range(0..corpus.len()),
    }
}

/// [`choose_next`] with the distribution cached between corpus changes.
#[derive(Debug, Default)]
pub struct Scheduler {
    dist: Option<WeightedIndex<f64>>,
    len: usize,
}

impl Scheduler {
    /// Must be called whenever seeds are added or energies change.
    pub fn rebuild(&mut self, corpus: &[SeedEntry]) {
        self.len = corpus.len();
        self.dist = WeightedIndex::new(corpus.iter().map(weight)).ok();
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        assert!(self.len > 0, "cannot choose from an empty corpus");
        match &self.dist {
            Some(dist) => dist.sample(rng),
            None => rng.gen_range(0..self.len),
        }
    }
}
