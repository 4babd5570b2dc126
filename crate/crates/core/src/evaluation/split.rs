use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::FrequencyTable;

/// Source classes `P`, target classes `Q`, and the held-out trial index of
/// each source class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Ascending.
    pub source: Vec<usize>,
    /// Ascending; `source ∪ target` covers every class.
    pub target: Vec<usize>,
    /// `held_out[i]` is the test trial index of `source[i]`.
    pub held_out: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn held_out_of(&self, class: usize) -> Option<usize> {
        self.source
            .iter()
            .position(|c| *c == class)
            .map(|i| self.held_out[i])
    }
}

pub fn split_source_target(
    table: &FrequencyTable,
    n_p: usize,
    n_trials: usize,
    seed: u64,
) -> Result<SplitPlan> {
    let n = table.len();
    if n_p == 0 || n_p >= n {
        return Err(Error::invalid(format!(
            "source class count {n_p} must lie in 1..{n}"
        )));
    }
    if n_trials < 2 {
        return Err(Error::invalid(
            "need at least two trials per class to hold one out",
        ));
    }
    let mut r = rng::stream("split", seed);
    let mut source = index::sample(&mut r, n, n_p).into_vec();
    source.sort_unstable();
    let target = (0..n).filter(|c| !source.contains(c)).collect();
    let held_out = source.iter().map(|_| r.random_range(0..n_trials)).collect();
    Ok(SplitPlan {
        source,
        target,
        held_out,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize) -> FrequencyTable {
        FrequencyTable::from_freqs(
            &(0..n).map(|i| 8.0 + 0.2 * i as f64).collect::<Vec<_>>(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn partition_and_determinism() {
        let t = table(40);
        let p = split_source_target(&t, 4, 6, 9).unwrap();
        assert_eq!(p.source.len(), 4);
        assert_eq!(p.target.len(), 36);
        let mut all: Vec<usize> = p.source.iter().chain(&p.target).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert!(p.held_out.iter().all(|h| *h < 6));
        assert_eq!(p, split_source_target(&t, 4, 6, 9).unwrap());
        assert!(split_source_target(&t, 0, 6, 1).is_err());
        assert!(split_source_target(&t, 40, 6, 1).is_err());
        assert!(split_source_target(&t, 4, 1, 1).is_err());
    }

    #[test]
    fn classes_are_chosen_uniformly() {
        let (n, n_p, seeds) = (40usize, 4usize, 1000u64);
        let t = table(n);
        let mut counts = vec![0usize; n];
        for seed in 0..seeds {
            for c in split_source_target(&t, n_p, 6, seed).unwrap().source {
                counts[c] += 1;
            }
        }
        let p = n_p as f64 / n as f64;
        let mean = seeds as f64 * p;
        let sd = (seeds as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - mean).abs() <= 3.0 * sd + 1.0,
                "count {c}, expected {mean} ± {}",
                3.0 * sd
            );
        }
    }
}
