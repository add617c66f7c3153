//! Argument parsing and config assembly (flags > config file > defaults).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{ExperimentConfig, ModelKind, ScenarioSource, SweepAxis, SweepSpec};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "quantsc", version, about = "Quantized spectrum cartography experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Quantizer bits B (2^B levels).
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    /// Dither variance σ².
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    /// Fraction of grid cells sampled, in (0, 1].
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelKind>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Scenario JSON; the built-in 51×51×64 profile when absent.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Generator manifest for `--model dgm`.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// Model rank R̂ (defaults to the scenario's R).
    #[arg(long, global = true)]
    pub rank: Option<usize>,
    /// Block-term rank L.
    #[arg(long = "L", global = true)]
    pub l: Option<usize>,
    /// Worker threads for independent trials.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Number of simulated maps pooled for bin design.
    #[arg(long, global = true)]
    pub bin_pool: Option<usize>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a ground-truth map, its SLFs and PSDs.
    Simulate,
    /// Design quantizer bins from pooled simulated maps.
    DesignBins,
    /// Sample and quantize fibers of a stored map.
    Quantize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        spec: PathBuf,
    },
    /// Recover a map from quantized observations.
    Recover {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Ground-truth map for LNRE.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Mean ± std LNRE over trials for each value of one axis.
    Sweep {
        /// rho, bits, eta, Xc, R or Rhat.
        #[arg(long)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Recoverability-bound diagnostics over fiber counts.
    Bounds {
        /// Quantizer spec; designed from the scenario when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        /// Also run one recovery per N and report its LNRE.
        #[arg(long)]
        measure: bool,
    },
    /// Re-render a sweep plot from its CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
    },
}

impl CommonArgs {
    /// Layer flags over the config file (if any) over defaults.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(self.seed => cfg.seed);
        set!(self.bits => cfg.bits);
        set!(self.sigma2 => cfg.sigma2);
        set!(self.rho => cfg.rho);
        set!(self.model => cfg.model);
        set!(self.out => cfg.out);
        set!(self.l => cfg.l);
        set!(self.bin_pool => cfg.bin_pool);
        if let Some(p) = &self.scenario {
            cfg.scenario = Some(ScenarioSource::Path(p.clone()));
        }
        if self.weights.is_some() {
            cfg.weights = self.weights.clone();
        }
        if self.rank.is_some() {
            cfg.rank = self.rank;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(n) = self.max_iters {
            cfg.solver.max_iters = n;
            cfg.dgm.max_iters = n;
        }
        if let Some(t) = self.rel_tol {
            cfg.solver.rel_tol = t;
            cfg.dgm.rel_tol = t;
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = cli.common.resolve()?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::DesignBins => commands::design_bins(&cfg),
        Command::Quantize { map, spec } => commands::quantize(&cfg, &map, &spec),
        Command::Recover { obs, spec, truth } => commands::recover(&cfg, &obs, &spec, truth.as_deref()),
        Command::Sweep { axis, values, trials } => {
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            match (axis, values, cfg.sweep.take()) {
                (Some(axis), Some(values), _) => cfg.sweep = Some(SweepSpec { axis, values }),
                (Some(axis), None, Some(s)) => cfg.sweep = Some(SweepSpec { axis, values: s.values }),
                (None, Some(values), Some(s)) => cfg.sweep = Some(SweepSpec { axis: s.axis, values }),
                (None, None, s) => cfg.sweep = s,
                _ => return Err(crate::CliError::config("--axis and --values must be given together")),
            }
            commands::sweep(&cfg)
        }
        Command::Bounds {
            spec,
            n_values,
            measure,
        } => {
            if n_values.is_some() {
                cfg.bounds.n_values = n_values;
            }
            cfg.bounds.measure |= measure;
            commands::bounds(&cfg, spec.as_deref())
        }
        Command::Plot { csv, png } => commands::plot(&csv, png),
    }
}
