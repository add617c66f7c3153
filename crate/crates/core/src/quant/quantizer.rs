//! Dithered quantization of sampled fibers and the observation container.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::QuantizerSpec;
use crate::error::{Error, Result};
use crate::simkit::{RadioMap, ReplacementMode, SampleSet};

/// Quantized spectra `Y(Ω, :)`: one row of `K` symbols per sampled location.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    omega: SampleSet,
    y: Array2<u32>,
    levels: usize,
}

impl ObservationSet {
    pub fn new(omega: SampleSet, y: Array2<u32>, levels: usize) -> Result<Self> {
        if y.nrows() != omega.len() {
            return Err(Error::dims(format!(
                "{} symbol rows for {} locations",
                y.nrows(),
                omega.len()
            )));
        }
        if levels < 2 {
            return Err(Error::invalid("observations need Q >= 2"));
        }
        if let Some(&bad) = y.iter().find(|&&q| q == 0 || q as usize > levels) {
            return Err(Error::invalid(format!("symbol {bad} outside 1..={levels}")));
        }
        Ok(Self { omega, y, levels })
    }

    pub fn omega(&self) -> &SampleSet {
        &self.omega
    }

    pub fn symbols(&self) -> &Array2<u32> {
        &self.y
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_fibers(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.y.ncols()
    }

    /// `{omega: [[i, j], …], y: [[q, …], …]}` plus grid/level metadata.
    pub fn to_json(&self, ni: usize, nj: usize) -> Result<String> {
        let doc = ObservationDoc {
            grid: Some([ni, nj]),
            levels: Some(self.levels),
            mode: Some(self.omega.mode()),
            omega: self.omega.locations().iter().map(|&(i, j)| [i, j]).collect(),
            y: self.y.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parse an observation document. Without a `grid` entry the grid is taken
    /// as the bounding box of the locations; without `levels`, as the largest
    /// symbol seen.
    pub fn from_json(text: &str) -> Result<(Self, usize, usize)> {
        let doc: ObservationDoc = serde_json::from_str(text)?;
        let [ni, nj] = doc.grid.unwrap_or_else(|| {
            let mi = doc.omega.iter().map(|p| p[0] + 1).max().unwrap_or(0);
            let mj = doc.omega.iter().map(|p| p[1] + 1).max().unwrap_or(0);
            [mi, mj]
        });
        let k = doc.y.first().map_or(0, Vec::len);
        if doc.y.iter().any(|r| r.len() != k) {
            return Err(Error::Format("ragged symbol rows".into()));
        }
        let flat: Vec<u32> = doc.y.iter().flatten().copied().collect();
        let y = Array2::from_shape_vec((doc.y.len(), k), flat)
            .map_err(|e| Error::Format(e.to_string()))?;
        let levels = doc
            .levels
            .unwrap_or_else(|| y.iter().copied().max().unwrap_or(2).max(2) as usize);
        let omega = SampleSet::new(
            doc.omega.iter().map(|p| (p[0], p[1])).collect(),
            doc.mode.unwrap_or(ReplacementMode::With),
            ni,
            nj,
        )?;
        Ok((Self::new(omega, y, levels)?, ni, nj))
    }

    pub fn save(&self, path: impl AsRef<Path>, ni: usize, nj: usize) -> Result<()> {
        std::fs::write(path, self.to_json(ni, nj)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, usize, usize)> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ObservationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<ReplacementMode>,
    omega: Vec<[usize; 2]>,
    y: Vec<Vec<u32>>,
}

/// Stream id for the `occurrence`-th visit of location `(i, j)`. Repeated
/// visits (sampling with replacement) get independent dither.
fn stream_id(i: usize, j: usize, occurrence: usize) -> u64 {
    ((occurrence as u64) << 44) | ((i as u64) << 22) | j as u64
}

/// Quantize transformed fibers `m` (`N × K`, row `n` belongs to `omega[n]`).
///
/// Dither for entry `(i, j, k)` comes from a ChaCha stream keyed by
/// `(seed, i, j)` at position `k`, so the output does not depend on the
/// order or parallelism of evaluation.
pub fn quantize(
    m: ArrayView2<'_, f64>,
    omega: &SampleSet,
    spec: &QuantizerSpec,
    seed: u64,
) -> Result<ObservationSet> {
    if m.nrows() != omega.len() {
        return Err(Error::dims(format!(
            "{} transformed fibers for {} locations",
            m.nrows(),
            omega.len()
        )));
    }
    let nk = m.ncols();
    let mut seen = std::collections::HashMap::new();
    let streams: Vec<u64> = omega
        .locations()
        .iter()
        .map(|&(i, j)| {
            let occ = seen.entry((i, j)).or_insert(0usize);
            let id = stream_id(i, j, *occ);
            *occ += 1;
            id
        })
        .collect();

    let sigma = spec.sigma();
    let mut y = vec![0u32; m.len()];
    if nk > 0 {
        crate::par::for_each_chunk_mut(&mut y, nk, |n, row| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(streams[n]);
            for (k, out) in row.iter_mut().enumerate() {
                let v: f64 = StandardNormal.sample(&mut rng);
                *out = spec.symbol_of(m[[n, k]] + sigma * v);
            }
        });
    }
    let y = Array2::from_shape_vec((omega.len(), nk), y).expect("buffer shape");
    ObservationSet::new(omega.clone(), y, spec.levels())
}

/// Transform the map's fibers at `omega` and quantize them.
pub fn quantize_map(
    map: &RadioMap,
    omega: &SampleSet,
    spec: &QuantizerSpec,
    seed: u64,
) -> Result<ObservationSet> {
    let (ni, nj, nk) = map.dims();
    if omega.locations().iter().any(|&(i, j)| i >= ni || j >= nj) {
        return Err(Error::dims("sample locations fall outside the map"));
    }
    let a = spec.a();
    let t = map.tensor();
    let m = Array2::from_shape_fn((omega.len(), nk), |(n, k)| {
        let (i, j) = omega.locations()[n];
        (t[[i, j, k]] + a).ln()
    });
    quantize(m.view(), omega, spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::link_prob;
    use crate::simkit::sample_fibers;

    fn one_site() -> SampleSet {
        SampleSet::new(vec![(0, 0)], ReplacementMode::Without, 1, 1).unwrap()
    }

    #[test]
    fn noiseless_threshold() {
        let spec = QuantizerSpec::new(1e-6, 1e-30, vec![0.0]).unwrap();
        let omega = SampleSet::new(vec![(0, 0), (0, 1)], ReplacementMode::Without, 1, 2).unwrap();
        let m = ndarray::array![[-1.0, 1.0], [1.0, -1.0]];
        let obs = quantize(m.view(), &omega, &spec, 3).unwrap();
        assert_eq!(obs.symbols(), &ndarray::array![[1, 2], [2, 1]]);
    }

    #[test]
    fn fair_coin_at_the_boundary() {
        let spec = QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap();
        let n = 100_000;
        let m = Array2::zeros((1, n));
        let obs = quantize(m.view(), &one_site(), &spec, 17).unwrap();
        let ones = obs.symbols().iter().filter(|&&q| q == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 0.005, "frequency {ones}");
    }

    #[test]
    fn frequencies_follow_link() {
        let spec = QuantizerSpec::new(1e-6, 0.8, vec![-1.0, -0.2, 0.9]).unwrap();
        let n = 100_000;
        let m = Array2::from_elem((1, n), -0.4);
        let obs = quantize(m.view(), &one_site(), &spec, 5).unwrap();
        for q in 1..=4u32 {
            let p = link_prob(q, -0.4, &spec);
            let freq = obs.symbols().iter().filter(|&&s| s == q).count() as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * sd, "q = {q}: {freq} vs {p}");
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let spec = QuantizerSpec::new(1e-6, 1.0, vec![-0.5, 0.0, 0.5]).unwrap();
        let omega = sample_fibers(10, 10, 30, ReplacementMode::Without, 1).unwrap();
        let m = Array2::from_shape_fn((30, 8), |(n, k)| (n as f64 - 15.0) / 20.0 + k as f64 * 0.01);
        let a = quantize(m.view(), &omega, &spec, 9).unwrap();
        let b = quantize(m.view(), &omega, &spec, 9).unwrap();
        let c = quantize(m.view(), &omega, &spec, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn repeated_sites_get_fresh_dither() {
        let spec = QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap();
        let omega = SampleSet::new(vec![(0, 0), (0, 0)], ReplacementMode::With, 1, 1).unwrap();
        let m = Array2::zeros((2, 64));
        let obs = quantize(m.view(), &omega, &spec, 2).unwrap();
        assert_ne!(obs.symbols().row(0), obs.symbols().row(1));
    }

    #[test]
    fn row_count_must_match() {
        let spec = QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap();
        assert!(quantize(Array2::zeros((2, 3)).view(), &one_site(), &spec, 0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let spec = QuantizerSpec::new(1e-6, 1.0, vec![-0.5, 0.0, 0.5]).unwrap();
        let omega = sample_fibers(6, 5, 7, ReplacementMode::Without, 4).unwrap();
        let m = Array2::from_shape_fn((7, 3), |(n, k)| n as f64 * 0.1 - k as f64 * 0.2);
        let obs = quantize(m.view(), &omega, &spec, 1).unwrap();
        let text = obs.to_json(6, 5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["omega"].as_array().unwrap().len(), 7);
        assert_eq!(v["y"][0].as_array().unwrap().len(), 3);
        let (back, ni, nj) = ObservationSet::from_json(&text).unwrap();
        assert_eq!((ni, nj), (6, 5));
        assert_eq!(back, obs);
    }

    #[test]
    fn minimal_document_is_accepted() {
        let (obs, ni, nj) =
            ObservationSet::from_json(r#"{"omega": [[0, 1], [2, 0]], "y": [[1, 2], [2, 2]]}"#).unwrap();
        assert_eq!((ni, nj), (3, 2));
        assert_eq!(obs.levels(), 2);
        assert!(ObservationSet::from_json(r#"{"omega": [[0, 0]], "y": [[0]]}"#).is_err());
    }
}
