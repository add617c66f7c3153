//! Subcommand bodies. Each writes fixed file names under the output
//! directory so reruns with the same config and seed overwrite identical
//! bytes.

use std::path::{Path, PathBuf};

use ndarray::{Array3, Axis};
use quantsc::analysis::{error_bound, lnre, tau_btd, tau_dgm, BoundParams};
use quantsc::btd::{btd_solve, save_factors, BtdDims, SolverConfig};
use quantsc::dgm::{dgm_solve, lipschitz_product, load_generator, DgmConfig, GeneratorNet};
use quantsc::optim::Trace;
use quantsc::quant::{compute_constants, quantize_map, ObservationSet, QuantizerSpec};
use quantsc::simkit::{read_qmap, sample_fibers, write_qmap, RadioMap, ReplacementMode};
use serde::Serialize;

use crate::config::{fiber_count, ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};
use crate::pipeline::{design_spec, run_trial, sub_seed, ModelSpec};
use crate::sweep::{read_sweep_csv, run_sweep, write_rows, write_sweep, SWEEP_PNG};

pub const SCENARIO_JSON: &str = "scenario.json";
pub const MAP_QMAP: &str = "map.qmap";
pub const SLFS_QMAP: &str = "slfs.qmap";
pub const PSDS_QMAP: &str = "psds.qmap";
pub const QUANTIZER_JSON: &str = "quantizer.json";
pub const OBSERVATIONS_JSON: &str = "observations.json";
pub const ESTIMATE_QMAP: &str = "estimate.qmap";
pub const TRACE_CSV: &str = "trace.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const BOUNDS_CSV: &str = "bounds.csv";
pub const BOUNDS_JSON: &str = "bounds.json";

fn out_dir(cfg: &ExperimentConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(format!("creating {}", cfg.out.display()), e))?;
    Ok(&cfg.out)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn load_net(cfg: &ExperimentConfig) -> CliResult<Option<GeneratorNet>> {
    match (cfg.model, &cfg.weights) {
        (ModelKind::Btd, _) => Ok(None),
        (ModelKind::Dgm, None) => Err(CliError::config("model dgm needs --weights <manifest.json>")),
        (ModelKind::Dgm, Some(p)) => {
            if !p.exists() {
                return Err(CliError::config(format!("weight file {} not found", p.display())));
            }
            load_generator(p)
                .map(Some)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))
        }
    }
}

/// Ground-truth map, SLFs (`I × J × R`) and PSDs (`K × R × 1`).
pub fn simulate(cfg: &ExperimentConfig) -> CliResult<()> {
    cfg.validate()?;
    let scenario = cfg.scenario()?.with_seed(cfg.seed);
    let truth = scenario.generate()?;
    let out = out_dir(cfg)?;
    write_text(&out.join(SCENARIO_JSON), &scenario.to_json()?)?;
    write_qmap(out.join(MAP_QMAP), truth.map.tensor())?;
    let slfs: Vec<_> = truth.slfs.iter().map(|s| s.grid().view()).collect();
    let slfs = ndarray::stack(Axis(2), &slfs).map_err(|e| CliError::config(e.to_string()))?;
    write_qmap(out.join(SLFS_QMAP), &slfs)?;
    let (k, r) = (scenario.k, truth.psds.len());
    let psds = Array3::from_shape_fn((k, r, 1), |(k, r, _)| truth.psds[r].values()[k]);
    write_qmap(out.join(PSDS_QMAP), &psds)?;
    println!(
        "simulated {}x{}x{} map with {} emitters -> {}",
        scenario.i,
        scenario.j,
        scenario.k,
        r,
        out.display()
    );
    Ok(())
}

pub fn design_bins(cfg: &ExperimentConfig) -> CliResult<()> {
    cfg.validate()?;
    let scenario = cfg.scenario()?;
    let spec = design_spec(&scenario, cfg.bits, cfg.sigma2, cfg.bin_pool, cfg.seed)?;
    let out = out_dir(cfg)?;
    spec.save(out.join(QUANTIZER_JSON))?;
    println!("{} boundaries from {} pooled maps: {:?}", spec.boundaries().len(), cfg.bin_pool, spec.boundaries());
    Ok(())
}

/// Sample `round(ρ·I·J)` fibers of a stored map and quantize them.
pub fn quantize(cfg: &ExperimentConfig, map: &Path, spec: &Path) -> CliResult<()> {
    cfg.validate()?;
    let map = RadioMap::new(read_qmap(map)?)?;
    let spec = QuantizerSpec::load(spec)?;
    let (ni, nj, _) = map.dims();
    let n = fiber_count(cfg.rho, ni, nj);
    let omega = sample_fibers(ni, nj, n, ReplacementMode::Without, sub_seed(cfg.seed, 1))?;
    let obs = quantize_map(&map, &omega, &spec, sub_seed(cfg.seed, 2))?;
    let out = out_dir(cfg)?;
    obs.save(out.join(OBSERVATIONS_JSON), ni, nj)?;
    println!("quantized {n} fibers to {} levels", spec.levels());
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    model: ModelKind,
    rank: usize,
    iterations: usize,
    converged: bool,
    restarts: u32,
    final_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lnre: Option<f64>,
}

fn write_trace(path: &Path, trace: &Trace) -> CliResult<()> {
    write_text(path, &trace.to_csv())
}

pub fn recover(cfg: &ExperimentConfig, obs: &Path, spec: &Path, truth: Option<&Path>) -> CliResult<()> {
    cfg.validate()?;
    let net = load_net(cfg)?;
    let (obs, ni, nj) = ObservationSet::load(obs)?;
    let spec = QuantizerSpec::load(spec)?;
    let rank = match cfg.rank {
        Some(r) => r,
        None => cfg.scenario()?.r,
    };
    let out = out_dir(cfg)?;
    let (map, trace) = match &net {
        None => {
            let dims = BtdDims {
                i: ni,
                j: nj,
                k: obs.n_bins(),
                r: rank,
                l: cfg.l,
            };
            let solver = SolverConfig {
                seed: cfg.seed,
                ..cfg.solver.clone()
            };
            let sol = btd_solve(&obs, &spec, dims, &solver)?;
            save_factors(out.join("factors"), &sol.factors)?;
            (sol.map, sol.trace)
        }
        Some(net) => {
            let dgm = DgmConfig {
                seed: cfg.seed,
                ..cfg.dgm.clone()
            };
            let sol = dgm_solve(&obs, &spec, net, rank, &dgm)?;
            let z = sol.vars.z();
            write_qmap(out.join("latents.qmap"), &z.clone().insert_axis(Axis(2)))?;
            write_qmap(out.join(PSDS_QMAP), &sol.vars.c().clone().insert_axis(Axis(2)))?;
            (sol.map, sol.trace)
        }
    };
    write_qmap(out.join(ESTIMATE_QMAP), map.tensor())?;
    write_trace(&out.join(TRACE_CSV), &trace)?;
    let lnre = match truth {
        Some(p) => Some(lnre(&map, &RadioMap::new(read_qmap(p)?)?, spec.a())?),
        None => None,
    };
    let metrics = Metrics {
        model: cfg.model,
        rank,
        iterations: trace.iterations(),
        converged: trace.converged,
        restarts: trace.restarts,
        final_objective: trace.final_objective(),
        lnre,
    };
    write_text(&out.join(METRICS_JSON), &serde_json::to_string_pretty(&metrics)?)?;
    match lnre {
        Some(e) => println!("{} iterations, LNRE {e:.6}", metrics.iterations),
        None => println!("{} iterations", metrics.iterations),
    }
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig) -> CliResult<()> {
    let net = load_net(cfg)?;
    let result = run_sweep(cfg, net.as_ref())?;
    let out = out_dir(cfg)?;
    for r in &result.rows {
        println!("{}={}: LNRE {:.6} ± {:.6}", r.axis, r.value, r.lnre_mean, r.lnre_std);
    }
    write_sweep(out, &result)
}

/// Re-render the plot from an existing `sweep.csv`.
pub fn plot(csv: &Path, png: Option<PathBuf>) -> CliResult<()> {
    let rows = read_sweep_csv(csv)?;
    let png = png.unwrap_or_else(|| csv.with_file_name(SWEEP_PNG));
    crate::plot::plot_sweep(&rows, &png)?;
    println!("wrote {}", png.display());
    Ok(())
}

#[derive(Serialize)]
struct BoundRow {
    #[serde(rename = "N")]
    n: usize,
    tau: f64,
    bound: f64,
    lnre_achieved: Option<f64>,
}

#[derive(Serialize)]
struct BoundsSummary {
    params: BoundParams,
    u_alpha: f64,
    l_alpha: f64,
    f_alpha: f64,
}

/// Bound diagnostics over a list of fiber counts. `lnre_achieved` is filled
/// only with `measure`, one recovery per `N`; bounds and achieved errors are
/// reported side by side, never compared.
pub fn bounds(cfg: &ExperimentConfig, spec: Option<&Path>) -> CliResult<()> {
    cfg.validate()?;
    let net = load_net(cfg)?;
    let scenario = cfg.scenario()?;
    let spec = match spec {
        Some(p) => QuantizerSpec::load(p)?,
        None => design_spec(&scenario, cfg.bits, cfg.sigma2, cfg.bin_pool, cfg.seed)?,
    };
    let b = &cfg.bounds;
    let rank = cfg.rank.unwrap_or(scenario.r);
    let alpha = b.alpha.unwrap_or(rank as f64);
    let (d, p, q) = match &net {
        Some(net) => {
            let d = net.latent_dim();
            (d, lipschitz_product(net), b.latent_radius.unwrap_or(3.0 * (d as f64).sqrt()))
        }
        None => (0, 0.0, 0.0),
    };
    let params = BoundParams {
        i: scenario.i,
        j: scenario.j,
        k: scenario.k,
        n: 1,
        r: rank,
        l: cfg.l,
        d,
        p,
        q,
        beta: scenario.beta(),
        kappa: scenario.kappa(),
        alpha,
        a: spec.a(),
        delta: b.delta,
        nu: b.nu,
    };
    params.validate()?;
    let constants = compute_constants(&spec, alpha)?;
    let n_values = b.n_values.clone().unwrap_or_else(|| {
        [0.03, 0.05, 0.10, 0.15, 0.20]
            .iter()
            .map(|&rho| fiber_count(rho, scenario.i, scenario.j))
            .collect()
    });
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in &n_values {
        let pn = params.with_n(n);
        let tau = match cfg.model {
            ModelKind::Btd => tau_btd(&pn)?,
            ModelKind::Dgm => tau_dgm(&pn)?,
        };
        let bound = error_bound(&pn, tau, &constants)?;
        let lnre_achieved = if b.measure {
            let model = match &net {
                None => ModelSpec::Btd {
                    rank,
                    l: cfg.l,
                    cfg: &cfg.solver,
                },
                Some(net) => ModelSpec::Dgm {
                    rank,
                    net,
                    cfg: &cfg.dgm,
                },
            };
            Some(run_trial(&scenario, &spec, n, &model, cfg.seed)?.lnre)
        } else {
            None
        };
        println!("N={n}: tau {tau:.6e}, bound {bound:.6e}");
        rows.push(BoundRow {
            n,
            tau,
            bound,
            lnre_achieved,
        });
    }
    let out = out_dir(cfg)?;
    write_rows(&out.join(BOUNDS_CSV), &rows, &["N", "tau", "bound", "lnre_achieved"])?;
    let summary = BoundsSummary {
        params,
        u_alpha: constants.u_alpha,
        l_alpha: constants.l_alpha,
        f_alpha: constants.f_alpha,
    };
    write_text(&out.join(BOUNDS_JSON), &serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
