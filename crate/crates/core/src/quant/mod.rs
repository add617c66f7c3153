//! Sensing channel: log transform, bin design, dithered Gaussian quantizer
//! and the resulting likelihood kernel.
//!
//! A sensor reports `y = q` when `b_{q−1} < log(x + a) + v ≤ b_q`, with
//! `v ~ N(0, σ²)` and `b_0 = −∞`, `b_Q = +∞`. Symbols are 1-based.

mod bins;
mod constants;
mod link;
pub mod normal;
mod quantizer;
mod transform;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bins::{design_bins, design_bins_pooled};
pub use constants::{compute_constants, compute_constants_on, LinkConstants, MRange, MIN_GRID_POINTS};
pub use link::{link_grad, link_log_prob, link_prob, link_score, nll_entry, NllEntry};
pub use quantizer::{quantize, quantize_map, ObservationSet};
pub use transform::{inverse_log_transform, log_transform, log_transform_map, DEFAULT_OFFSET};

/// Dither variance used when none is given.
pub const DEFAULT_SIGMA2: f64 = 1.7;

/// Fully determines the sensing channel.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    a: f64,
    sigma2: f64,
    /// Finite interior boundaries `b_1 < … < b_{Q−1}`.
    boundaries: Vec<f64>,
}

impl QuantizerSpec {
    pub fn new(a: f64, sigma2: f64, boundaries: Vec<f64>) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!("offset a must be positive, got {a}")));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid(format!(
                "dither variance must be positive, got {sigma2}"
            )));
        }
        if boundaries.is_empty() {
            return Err(Error::invalid(
                "quantizer needs at least one interior boundary (Q >= 2)",
            ));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("interior boundaries must be finite"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("boundaries must be strictly increasing"));
        }
        Ok(Self {
            a,
            sigma2,
            boundaries,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Number of output symbols `Q`.
    pub fn levels(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// `(b_{q−1}, b_q)` for 1-based `q`, with infinite outer edges.
    pub fn interval(&self, q: u32) -> (f64, f64) {
        let q = q as usize;
        assert!(
            (1..=self.levels()).contains(&q),
            "symbol {q} outside 1..={}",
            self.levels()
        );
        let lo = if q == 1 {
            f64::NEG_INFINITY
        } else {
            self.boundaries[q - 2]
        };
        let hi = if q == self.levels() {
            f64::INFINITY
        } else {
            self.boundaries[q - 1]
        };
        (lo, hi)
    }

    /// Symbol of an already-dithered transformed value.
    pub fn symbol_of(&self, v: f64) -> u32 {
        (self.boundaries.partition_point(|&b| b < v) + 1) as u32
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.a, sigma2, self.boundaries.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SpecDoc {
            a: self.a,
            sigma2: self.sigma2,
            bits: bits_for_levels(self.levels()),
            bins: self.boundaries.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDoc = serde_json::from_str(text)?;
        let expected = bits_for_levels(doc.bins.len() + 1);
        if doc.bits != expected {
            return Err(Error::Format(format!(
                "B = {} does not match {} boundaries (expected B = {expected})",
                doc.bits,
                doc.bins.len()
            )));
        }
        Self::new(doc.a, doc.sigma2, doc.bins)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn bits_for_levels(levels: usize) -> u32 {
    levels.next_power_of_two().trailing_zeros()
}

/// Broadcast document `{a, sigma2, B, bins}`; `bins` lists finite boundaries.
#[derive(Serialize, Deserialize)]
struct SpecDoc {
    a: f64,
    sigma2: f64,
    #[serde(rename = "B")]
    bits: u32,
    bins: Vec<f64>,
}
