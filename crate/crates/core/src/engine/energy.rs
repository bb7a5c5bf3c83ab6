//! Energy schedule: seeds whose path visits rarely hit tree nodes, and
//! seeds whose offspring tend to leave their path, are picked more often.

use num_rational::Ratio;

use super::SeedEntry;
use crate::stt::SttView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyParams {
    /// Energy the underlying schedule would give every seed.
    pub base: Ratio<u64>,
    /// Energy never exceeds `cap_factor * base`.
    pub cap_factor: u64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            base: Ratio::from_integer(1),
            cap_factor: 10,
        }
    }
}

/// Energy of one seed against the current tree.
pub fn assign_energy(seed: &SeedEntry, stt: &SttView<'_>, params: EnergyParams) -> Ratio<u64> {
    let path = stt.path_nodes(seed.terminal);
    let rare = path.iter().filter(|&&n| stt.rare(n)).count() as u64;
    energy(path.len() as u64, rare, seed, params)
}

/// Recomputes the energy of every corpus seed.
pub fn assign_energy_all(corpus: &mut [SeedEntry], stt: &SttView<'_>, params: EnergyParams) {
    let rarity = stt.path_rarity();
    for seed in corpus {
        let (len, rare) = rarity[seed.terminal.index()];
        seed.energy = energy(u64::from(len), u64::from(rare), seed, params);
    }
}

fn energy(path_len: u64, rare: u64, seed: &SeedEntry, params: EnergyParams) -> Ratio<u64> {
    let e = params.base;
    let e1 = if path_len == 0 {
        e
    } else {
        e + e * Ratio::new(rare, path_len)
    };

    let divergence = match (seed.offspring_total, seed.offspring_same_path) {
        (0, _) => Ratio::from_integer(1),
        (total, 0) => Ratio::from_integer(total),
        (total, same) => Ratio::new(total, same),
    };
    let e2 = e1 * divergence;

    e2.min(e * params.cap_factor)
}
