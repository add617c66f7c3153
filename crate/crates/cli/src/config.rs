//! Experiment configuration. Precedence: command-line flags, then the JSON
//! config file, then the defaults below.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quantsc::btd::SolverConfig;
use quantsc::dgm::DgmConfig;
use quantsc::simkit::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_BITS: u32 = 3;
pub const DEFAULT_SIGMA2: f64 = 1.7;
pub const DEFAULT_RHO: f64 = 0.1;
pub const DEFAULT_L: usize = 10;
pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_BIN_POOL: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Btd,
    Dgm,
}

/// A scenario given either as a path to a scenario document or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Path(PathBuf),
    Inline(Box<Scenario>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "bits")]
    Bits,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "Xc")]
    Xc,
    #[serde(rename = "R")]
    R,
    /// Model rank used by the solver, with the ground truth fixed.
    #[serde(rename = "Rhat")]
    Rhat,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::Bits => "bits",
            SweepAxis::Eta => "eta",
            SweepAxis::Xc => "Xc",
            SweepAxis::R => "R",
            SweepAxis::Rhat => "Rhat",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepAxis::Bits | SweepAxis::R | SweepAxis::Rhat)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepAxis::Rho,
            SweepAxis::Bits,
            SweepAxis::Eta,
            SweepAxis::Xc,
            SweepAxis::R,
            SweepAxis::Rhat,
        ]
        .into_iter()
        .find(|a| a.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown sweep axis {s:?} (expected rho, bits, eta, Xc, R or Rhat)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub delta: f64,
    pub nu: f64,
    /// Upper bound on map entries; defaults to `R` (unit-peak SLFs, PSD
    /// entries at most 1).
    pub alpha: Option<f64>,
    /// Latent-ball radius for the generative model; defaults to `3√D`.
    pub latent_radius: Option<f64>,
    /// Fiber counts to evaluate; defaults to ρ ∈ {3, 5, 10, 15, 20}% of `IJ`.
    pub n_values: Option<Vec<usize>>,
    /// Run one recovery per `N` and report the achieved LNRE.
    pub measure: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            nu: 0.0,
            alpha: None,
            latent_radius: None,
            n_values: None,
            measure: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `None` selects the built-in 51 × 51 × 64 profile.
    pub scenario: Option<ScenarioSource>,
    pub bits: u32,
    pub sigma2: f64,
    pub rho: f64,
    pub model: ModelKind,
    /// Model rank; defaults to the scenario's `R`.
    pub rank: Option<usize>,
    #[serde(rename = "L")]
    pub l: usize,
    pub solver: SolverConfig,
    pub dgm: DgmConfig,
    pub weights: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
    pub n_trials: usize,
    pub out: PathBuf,
    pub seed: u64,
    /// Number of simulated maps pooled for bin design.
    pub bin_pool: usize,
    /// Worker threads for independent trials; defaults to all cores.
    pub workers: Option<usize>,
    pub bounds: BoundsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            bits: DEFAULT_BITS,
            sigma2: DEFAULT_SIGMA2,
            rho: DEFAULT_RHO,
            model: ModelKind::Btd,
            rank: None,
            l: DEFAULT_L,
            solver: SolverConfig::default(),
            dgm: DgmConfig::default(),
            weights: None,
            sweep: None,
            n_trials: DEFAULT_TRIALS,
            out: PathBuf::from("out"),
            seed: 0,
            bin_pool: DEFAULT_BIN_POOL,
            workers: None,
            bounds: BoundsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Read a config file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(ScenarioSource::Path(p)) = &mut cfg.scenario {
            rebase(p);
        }
        if let Some(p) = &mut cfg.weights {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(CliError::config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(1..=16).contains(&self.bits) {
            return Err(CliError::config(format!("bits must lie in [1, 16], got {}", self.bits)));
        }
        if self.n_trials == 0 {
            return Err(CliError::config("n_trials must be at least 1"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(CliError::config("sigma2 must be positive"));
        }
        if self.l == 0 || self.rank == Some(0) || self.bin_pool == 0 || self.workers == Some(0) {
            return Err(CliError::config("L, rank, bin_pool and workers must be at least 1"));
        }
        self.solver.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.dgm.validate().map_err(|e| CliError::config(e.to_string()))?;
        if let Some(s) = &self.sweep {
            validate_sweep(s)?;
        }
        Ok(())
    }

    pub fn scenario(&self) -> CliResult<Scenario> {
        let s = match &self.scenario {
            None => Scenario::default_profile(),
            Some(ScenarioSource::Inline(s)) => {
                s.validate().map_err(|e| CliError::config(e.to_string()))?;
                (**s).clone()
            }
            Some(ScenarioSource::Path(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?;
                Scenario::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        Ok(s)
    }
}

fn validate_sweep(s: &SweepSpec) -> CliResult<()> {
    if s.values.is_empty() {
        return Err(CliError::config("sweep needs at least one value"));
    }
    for &v in &s.values {
        let ok = v.is_finite()
            && match s.axis {
                SweepAxis::Rho => v > 0.0 && v <= 1.0,
                SweepAxis::Bits => (1.0..=16.0).contains(&v),
                SweepAxis::Eta => v >= 0.0,
                SweepAxis::Xc => v > 0.0,
                SweepAxis::R | SweepAxis::Rhat => v >= 1.0,
            }
            && (!s.axis.integral() || v.fract() == 0.0);
        if !ok {
            return Err(CliError::config(format!("invalid {} value {v}", s.axis)));
        }
    }
    Ok(())
}

/// Number of sampled fibers for a sampling fraction, at least one.
pub fn fiber_count(rho: f64, ni: usize, nj: usize) -> usize {
    ((rho * (ni * nj) as f64).round() as usize).clamp(1, ni * nj)
}
