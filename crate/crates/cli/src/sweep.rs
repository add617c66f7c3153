//! Parameter sweeps: `n_trials` end-to-end trials per axis value, summarized
//! as mean ± std LNRE.
//!
//! CSV schemas (stable):
//! - `sweep.csv`: `axis,value,trials,lnre_mean,lnre_std`
//! - `trials.csv`: `axis,value,trial,seed,lnre,iterations,converged`
//!
//! Trial `t` uses seed `seed + t` for every axis value, so values are
//! compared on the same ground-truth maps. No timing enters either file.

use std::path::Path;

use quantsc::dgm::GeneratorNet;
use quantsc::quant::QuantizerSpec;
use quantsc::simkit::Scenario;
use serde::{Deserialize, Serialize};

use crate::config::{fiber_count, ExperimentConfig, ModelKind, SweepAxis, SweepSpec};
use crate::error::{CliError, CliResult};
use crate::pipeline::{design_spec, run_trial, ModelSpec, TrialOutcome};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const TRIALS_CSV: &str = "trials.csv";
pub const SWEEP_PNG: &str = "sweep.png";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub trials: usize,
    pub lnre_mean: f64,
    /// Sample standard deviation (0 for a single trial).
    pub lnre_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub axis: String,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub lnre: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRow>,
    /// First failing trial in (axis value, trial) order, if any. Rows cover
    /// only the axis values before it.
    pub failure: Option<TrialFailure>,
}

#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub value: f64,
    pub trial: usize,
    pub error: String,
    pub numerical: bool,
}

/// Everything one axis value needs.
struct Point {
    value: f64,
    scenario: Scenario,
    rho: f64,
    rank: usize,
    spec_key: (u32, usize),
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn points(cfg: &ExperimentConfig, sweep: &SweepSpec) -> CliResult<Vec<Point>> {
    let base = cfg.scenario()?;
    let base_rank = cfg.rank.unwrap_or(base.r);
    sweep
        .values
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let mut p = Point {
                value: v,
                scenario: base.clone(),
                rho: cfg.rho,
                rank: base_rank,
                spec_key: (cfg.bits, 0),
            };
            match sweep.axis {
                SweepAxis::Rho => p.rho = v,
                SweepAxis::Bits => p.spec_key = (v as u32, 0),
                SweepAxis::Rhat => p.rank = v as usize,
                SweepAxis::Eta => {
                    p.scenario.eta = v;
                    p.spec_key.1 = n;
                }
                SweepAxis::Xc => {
                    p.scenario.xc = v;
                    p.spec_key.1 = n;
                }
                SweepAxis::R => {
                    p.scenario.r = v as usize;
                    p.rank = v as usize;
                    p.spec_key.1 = n;
                }
            }
            p.scenario.validate().map_err(|e| CliError::config(format!("{}={v}: {e}", sweep.axis)))?;
            Ok(p)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn run_jobs<T, F>(n: usize, workers: Option<usize>, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<T, F>(n: usize, _workers: Option<usize>, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok((0..n).map(f).collect())
}

/// Run every (axis value, trial) pair on the worker pool and gather results
/// in deterministic order.
pub fn run_sweep(cfg: &ExperimentConfig, net: Option<&GeneratorNet>) -> CliResult<SweepResult> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::config("no sweep axis configured"))?;
    if cfg.model == ModelKind::Dgm && net.is_none() {
        return Err(CliError::config("model dgm needs a generator weight file"));
    }
    let points = points(cfg, sweep)?;

    // one quantizer per distinct (bits, scenario) combination
    let mut specs: Vec<((u32, usize), QuantizerSpec)> = Vec::new();
    for p in &points {
        if !specs.iter().any(|(k, _)| *k == p.spec_key) {
            let spec = design_spec(&p.scenario, p.spec_key.0, cfg.sigma2, cfg.bin_pool, cfg.seed)?;
            specs.push((p.spec_key, spec));
        }
    }
    let spec_of = |p: &Point| &specs.iter().find(|(k, _)| *k == p.spec_key).expect("designed").1;

    let trials = cfg.n_trials;
    let outcomes: Vec<quantsc::Result<TrialOutcome>> = run_jobs(points.len() * trials, cfg.workers, |job| {
        let p = &points[job / trials];
        let seed = cfg.seed + (job % trials) as u64;
        let model = match cfg.model {
            ModelKind::Btd => ModelSpec::Btd {
                rank: p.rank,
                l: cfg.l,
                cfg: &cfg.solver,
            },
            ModelKind::Dgm => ModelSpec::Dgm {
                rank: p.rank,
                net: net.expect("checked"),
                cfg: &cfg.dgm,
            },
        };
        let n = fiber_count(p.rho, p.scenario.i, p.scenario.j);
        run_trial(&p.scenario, spec_of(p), n, &model, seed)
    })?;

    let mut result = SweepResult::default();
    let axis = sweep.axis.name().to_string();
    for (p, chunk) in points.iter().zip(outcomes.chunks(trials)) {
        let mut lnres = Vec::with_capacity(trials);
        for (t, outcome) in chunk.iter().enumerate() {
            match outcome {
                Ok(o) => {
                    lnres.push(o.lnre);
                    result.trials.push(TrialRow {
                        axis: axis.clone(),
                        value: p.value,
                        trial: t,
                        seed: cfg.seed + t as u64,
                        lnre: o.lnre,
                        iterations: o.trace.iterations(),
                        converged: o.trace.converged,
                    });
                }
                Err(e) => {
                    result.failure = Some(TrialFailure {
                        value: p.value,
                        trial: t,
                        error: e.to_string(),
                        numerical: matches!(e, quantsc::Error::Numerical(_) | quantsc::Error::Degenerate(_)),
                    });
                    return Ok(result);
                }
            }
        }
        let (lnre_mean, lnre_std) = mean_std(&lnres);
        result.rows.push(SweepRow {
            axis: axis.clone(),
            value: p.value,
            trials,
            lnre_mean,
            lnre_std,
        });
    }
    Ok(result)
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 5] = ["axis", "value", "trials", "lnre_mean", "lnre_std"];
pub const TRIALS_HEADER: [&str; 7] = ["axis", "value", "trial", "seed", "lnre", "iterations", "converged"];

pub fn read_sweep_csv(path: &Path) -> CliResult<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<SweepRow>, _>>()?)
}

/// Write both CSVs (and the plot when any row exists) into `out`, then
/// report a trial failure, if there was one, as an error.
pub fn write_sweep(out: &Path, result: &SweepResult) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    write_rows(&out.join(SWEEP_CSV), &result.rows, &SWEEP_HEADER)?;
    write_rows(&out.join(TRIALS_CSV), &result.trials, &TRIALS_HEADER)?;
    if !result.rows.is_empty() {
        crate::plot::plot_sweep(&result.rows, &out.join(SWEEP_PNG))?;
    }
    match &result.failure {
        None => Ok(()),
        Some(f) if f.numerical => Err(CliError::Core(quantsc::Error::Numerical(format!(
            "trial {} at value {} failed: {}",
            f.trial, f.value, f.error
        )))),
        Some(f) => Err(CliError::config(format!(
            "trial {} at value {} failed: {}",
            f.trial, f.value, f.error
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            SweepRow {
                axis: "rho".into(),
                value: 0.05,
                trials: 3,
                lnre_mean: 0.123456789,
                lnre_std: 0.01,
            },
            SweepRow {
                axis: "rho".into(),
                value: 0.1,
                trials: 3,
                lnre_mean: 0.05,
                lnre_std: 0.0,
            },
        ];
        let path = dir.path().join("s.csv");
        write_rows(&path, &rows, &SWEEP_HEADER).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("axis,value,trials,lnre_mean,lnre_std\n"));
        assert_eq!(read_sweep_csv(&path).unwrap(), rows);
    }
}
