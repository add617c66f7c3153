use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementMode {
    With,
    #[default]
    Without,
}

/// Sensor locations `Ω` on an `I × J` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    locations: Vec<(usize, usize)>,
    mode: ReplacementMode,
}

impl SampleSet {
    /// Validates bounds and, in `Without` mode, distinctness.
    pub fn new(
        locations: Vec<(usize, usize)>,
        mode: ReplacementMode,
        ni: usize,
        nj: usize,
    ) -> Result<Self> {
        if let Some(&(i, j)) = locations.iter().find(|&&(i, j)| i >= ni || j >= nj) {
            return Err(Error::invalid(format!(
                "location ({i}, {j}) outside the {ni} x {nj} grid"
            )));
        }
        if mode == ReplacementMode::Without {
            let mut seen = vec![false; ni * nj];
            for &(i, j) in &locations {
                if std::mem::replace(&mut seen[i * nj + j], true) {
                    return Err(Error::invalid(format!(
                        "duplicate location ({i}, {j}) in without-replacement set"
                    )));
                }
            }
        }
        Ok(Self { locations, mode })
    }

    pub fn locations(&self) -> &[(usize, usize)] {
        &self.locations
    }

    pub fn mode(&self) -> ReplacementMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Draw `n` fiber locations uniformly from `[I] × [J]`.
pub fn sample_fibers(
    ni: usize,
    nj: usize,
    n: usize,
    mode: ReplacementMode,
    seed: u64,
) -> Result<SampleSet> {
    let cells = ni * nj;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations: Vec<(usize, usize)> = match mode {
        ReplacementMode::Without => {
            if n > cells {
                return Err(Error::invalid(format!(
                    "cannot draw {n} distinct locations from {cells} cells"
                )));
            }
            rand::seq::index::sample(&mut rng, cells, n)
                .into_iter()
                .map(|c| (c / nj, c % nj))
                .collect()
        }
        ReplacementMode::With => {
            if n > 0 && cells == 0 {
                return Err(Error::invalid("cannot sample from an empty grid"));
            }
            (0..n)
                .map(|_| {
                    let c = rng.random_range(0..cells);
                    (c / nj, c % nj)
                })
                .collect()
        }
    };
    Ok(SampleSet { locations, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn exhaustive_sampling_covers_grid() {
        let s = sample_fibers(5, 7, 35, ReplacementMode::Without, 1).unwrap();
        let set: HashSet<_> = s.locations().iter().copied().collect();
        assert_eq!(set.len(), 35);
    }

    #[test]
    fn empty_sample() {
        assert!(sample_fibers(5, 7, 0, ReplacementMode::Without, 1)
            .unwrap()
            .is_empty());
        assert!(sample_fibers(5, 7, 0, ReplacementMode::With, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn ten_percent_of_default_grid() {
        let n = (0.10f64 * 51.0 * 51.0).round() as usize;
        assert_eq!(n, 260);
        let s = sample_fibers(51, 51, n, ReplacementMode::Without, 3).unwrap();
        assert_eq!(s.len(), 260);
        assert!(s.locations().iter().all(|&(i, j)| i < 51 && j < 51));
    }

    #[test]
    fn too_many_without_replacement() {
        assert!(sample_fibers(3, 3, 10, ReplacementMode::Without, 1).is_err());
        assert_eq!(
            sample_fibers(3, 3, 10, ReplacementMode::With, 1).unwrap().len(),
            10
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_fibers(20, 20, 50, ReplacementMode::Without, 8).unwrap();
        let b = sample_fibers(20, 20, 50, ReplacementMode::Without, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constructor_checks() {
        assert!(SampleSet::new(vec![(0, 0), (0, 0)], ReplacementMode::Without, 2, 2).is_err());
        assert!(SampleSet::new(vec![(0, 0), (0, 0)], ReplacementMode::With, 2, 2).is_ok());
        assert!(SampleSet::new(vec![(2, 0)], ReplacementMode::With, 2, 2).is_err());
    }
}
