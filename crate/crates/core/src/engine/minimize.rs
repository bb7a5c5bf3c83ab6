//! Reduction of a crashing input history to a 1-minimal sublist.

use crate::error::{Error, Result};
use crate::targets::{FeatureTrace, Outcome, Probe, Target};

/// Result of replaying an input list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryReplay {
    /// Index and bug id of the first crashing input.
    pub crash: Option<(usize, &'static str)>,
}

/// Runs `history` in order on a freshly reset target. With `implicit`, the
/// target keeps its persistent state between inputs; otherwise it is reset
/// before each one. Stops at the first crash.
pub fn replay_history(target: &mut dyn Target, history: &[Vec<u8>], implicit: bool) -> HistoryReplay {
    let mut features = FeatureTrace::new();
    target.reset();
    for (i, input) in history.iter().enumerate() {
        if !implicit {
            target.reset();
        }
        features.clear();
        if let Outcome::Crash(bug) = target.execute(input, &mut Probe::features_only(&mut features)) {
            return HistoryReplay {
                crash: Some((i, bug)),
            };
        }
    }
    HistoryReplay { crash: None }
}

/// Shrinks a history that crashes when replayed with implicit state to a
/// sublist, in the original order, that still crashes with the same bug
/// and from which no single input can be removed.
pub fn minimize_history(history: &[Vec<u8>], target: &mut dyn Target) -> Result<Vec<Vec<u8>>> {
    let Some((last, bug)) = replay_history(target, history, true).crash else {
        return Err(Error::NotReproducible);
    };
    let mut crashes = |subset: &[usize]| {
        let inputs: Vec<Vec<u8>> = subset.iter().map(|&i| history[i].clone()).collect();
        replay_history(target, &inputs, true)
            .crash
            .is_some_and(|(_, b)| b == bug)
    };

    // Inputs after the first crash never ran.
    let mut current: Vec<usize> = (0..=last).collect();
    let mut granularity = 2usize;
    while current.len() >= 2 {
        let chunks = split(&current, granularity);
        let mut reduced = false;
        for chunk in &chunks {
            if crashes(chunk) {
                current = chunk.clone();
                granularity = 2;
                reduced = true;
                break;
            }
        }
        if !reduced && granularity > 2 {
            for i in 0..chunks.len() {
                let complement: Vec<usize> = chunks
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .flat_map(|(_, c)| c.iter().copied())
                    .collect();
                if crashes(&complement) {
                    current = complement;
                    granularity = (granularity - 1).max(2);
                    reduced = true;
                    break;
                }
            }
        }
        if !reduced {
            if granularity >= current.len() {
                break;
            }
            granularity = (granularity * 2).min(current.len());
        }
    }

    // Make sure no single input can go.
    let mut i = 0;
    while i < current.len() && current.len() > 1 {
        let mut without = current.clone();
        without.remove(i);
        if crashes(&without) {
            current = without;
        } else {
            i += 1;
        }
    }
    Ok(current.into_iter().map(|i| history[i].clone()).collect())
}

/// Splits into `n` contiguous chunks of near-equal size.
fn split(items: &[usize], n: usize) -> Vec<Vec<usize>> {
    let n = n.min(items.len()).max(1);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for k in 0..n {
        let end = start + (items.len() - start) / (n - k);
        out.push(items[start..end].to_vec());
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{
        BugClass, PlantedBug, ReferenceMachine, TargetDescriptor,
    };

    static DESCRIPTOR: TargetDescriptor = TargetDescriptor {
        name: "pair",
        state_variables: &[],
        planted_bugs: &[PlantedBug {
            id: "pair",
            class: BugClass::ImplicitState,
        }],
        feature_count: 0,
    };

    /// Crashes once it has seen input `b"2"` and later `b"4"`.
    #[derive(Default)]
    struct Pair {
        saw_two: bool,
    }

    impl Target for Pair {
        fn descriptor(&self) -> &'static TargetDescriptor {
            &DESCRIPTOR
        }
        fn execute(&mut self, input: &[u8], _: &mut Probe<'_>) -> Outcome {
            match input {
                b"2" => self.saw_two = true,
                b"4" if self.saw_two => return Outcome::Crash("pair"),
                _ => {}
            }
            Outcome::Ok
        }
        fn reset(&mut self) {
            self.saw_two = false;
        }
        fn seeds(&self) -> Vec<Vec<u8>> {
            vec![]
        }
        fn reference_machine(&self) -> ReferenceMachine {
            ReferenceMachine::default()
        }
        fn alphabet(&self) -> Vec<Vec<u8>> {
            vec![]
        }
        fn enumeration_depth(&self) -> usize {
            0
        }
    }

    fn inputs(items: &[&str]) -> Vec<Vec<u8>> {
        items.iter().map(|s| s.as_bytes().to_vec()).collect()
    }

    #[test]
    fn keeps_only_the_pair() {
        let history = inputs(&["1", "2", "3", "4", "5"]);
        let min = minimize_history(&history, &mut Pair::default()).unwrap();
        assert_eq!(min, inputs(&["2", "4"]));
    }

    #[test]
    fn not_reproducible() {
        let history = inputs(&["4", "2"]);
        assert!(matches!(
            minimize_history(&history, &mut Pair::default()),
            Err(Error::NotReproducible)
        ));
    }

    #[test]
    fn split_covers_everything() {
        let items: Vec<usize> = (0..10).collect();
        for n in 1..12 {
            let parts = split(&items, n);
            assert_eq!(parts.concat(), items);
            assert!(parts.iter().all(|p| !p.is_empty()));
        }
    }
}
