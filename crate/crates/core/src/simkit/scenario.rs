//! Scenario documents (JSON) and ground-truth generation from them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compose, gen_btd_slf, gen_psd, gen_slf, Psd, PsdConfig, RadioMap, ShadowingParams, Slf};
use crate::error::{Error, Result};

/// Pathloss exponent used for randomly placed emitters.
const DEFAULT_GAMMA: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

/// How emitter SLFs are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Pathloss plus correlated log-normal shadowing.
    #[default]
    Shadowing,
    /// Exactly rank-`L` nonnegative SLFs (block-term ground truth).
    Btd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// Empty means "place `R` emitters uniformly at random from the seed".
    #[serde(default)]
    pub emitters: Vec<EmitterSpec>,
    #[serde(rename = "Xc")]
    pub xc: f64,
    pub eta: f64,
    pub n_subbands: usize,
    /// Bound on `‖S_r‖_F`; defaults to `√(IJ)`, which max-1 SLFs always meet.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Bound on `‖c_r‖₂`; defaults to `√K`.
    #[serde(default)]
    pub kappa: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub generator: GeneratorKind,
    /// Rank of each SLF when `generator` is `btd`.
    #[serde(rename = "L", default)]
    pub l: Option<usize>,
}

/// Sampled SLFs, PSDs and the composed map.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub slfs: Vec<Slf>,
    pub psds: Vec<Psd>,
    pub map: RadioMap,
}

impl GroundTruth {
    /// Largest SLF Frobenius norm (a measured `β`).
    pub fn measured_beta(&self) -> f64 {
        self.slfs.iter().map(Slf::frobenius).fold(0.0, f64::max)
    }

    /// Largest PSD norm (a measured `κ`).
    pub fn measured_kappa(&self) -> f64 {
        self.psds.iter().map(Psd::norm).fold(0.0, f64::max)
    }
}

/// Independent sub-seed for stream `stream` of `base`.
pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.random()
}

impl Scenario {
    /// 51 × 51 grid, 64 subbands, 6 emitters, `(Xc, η) = (50, 6)`.
    pub fn default_profile() -> Self {
        Self {
            i: 51,
            j: 51,
            k: 64,
            r: 6,
            emitters: Vec::new(),
            xc: 50.0,
            eta: 6.0,
            n_subbands: 4,
            beta: None,
            kappa: None,
            seed: 0,
            generator: GeneratorKind::Shadowing,
            l: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(((self.i * self.j) as f64).sqrt())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or((self.k as f64).sqrt())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i == 0 || self.j == 0 || self.k == 0 || self.r == 0 {
            return Err(Error::invalid("I, J, K and R must all be at least 1"));
        }
        if !self.emitters.is_empty() && self.emitters.len() != self.r {
            return Err(Error::invalid(format!(
                "R = {} but {} emitters listed",
                self.r,
                self.emitters.len()
            )));
        }
        if self.n_subbands == 0 || self.n_subbands > self.k {
            return Err(Error::invalid("n_subbands must be in 1..=K"));
        }
        if !(self.xc > 0.0) {
            return Err(Error::invalid("Xc must be positive"));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::invalid("eta must be nonnegative"));
        }
        if !(self.beta() > 0.0) || !(self.kappa() > 0.0) {
            return Err(Error::invalid("beta and kappa must be positive"));
        }
        if self.generator == GeneratorKind::Btd && self.l.unwrap_or(0) == 0 {
            return Err(Error::invalid("btd generator needs L >= 1"));
        }
        Ok(())
    }

    /// Emitters as listed, or drawn uniformly over the grid.
    pub fn resolved_emitters(&self) -> Vec<EmitterSpec> {
        if !self.emitters.is_empty() {
            return self.emitters.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0));
        (0..self.r)
            .map(|_| EmitterSpec {
                x: rng.random_range(0.0..=(self.i - 1) as f64),
                y: rng.random_range(0.0..=(self.j - 1) as f64),
                gamma: DEFAULT_GAMMA,
            })
            .collect()
    }

    pub fn generate(&self) -> Result<GroundTruth> {
        self.validate()?;
        let emitters = self.resolved_emitters();
        let psd_cfg = PsdConfig::new(self.k, self.n_subbands, self.kappa());
        let mut slfs = Vec::with_capacity(self.r);
        let mut psds = Vec::with_capacity(self.r);
        for (r, em) in emitters.iter().enumerate() {
            let slf_seed = derive_seed(self.seed, 1 + 2 * r as u64);
            let psd_seed = derive_seed(self.seed, 2 + 2 * r as u64);
            let slf = match self.generator {
                GeneratorKind::Shadowing => {
                    let params = ShadowingParams {
                        decorrelation_distance: self.xc,
                        shadowing_std: self.eta,
                        pathloss_exponent: em.gamma,
                        emitter: (em.x, em.y),
                    };
                    gen_slf(self.i, self.j, &params, slf_seed)?
                }
                GeneratorKind::Btd => {
                    gen_btd_slf(self.i, self.j, self.l.unwrap_or(1), slf_seed)?
                }
            };
            slf.check_bound(self.beta())?;
            slfs.push(slf);
            psds.push(gen_psd(&psd_cfg, psd_seed)?);
        }
        let map = compose(&slfs, &psds)?;
        Ok(GroundTruth { slfs, psds, map })
    }
}
