//! Simulate → quantize → recover → score, shared by `sweep` and `bounds`.

use quantsc::analysis::lnre;
use quantsc::btd::{btd_solve, BtdDims, SolverConfig};
use quantsc::dgm::{dgm_solve, DgmConfig, GeneratorNet};
use quantsc::optim::Trace;
use quantsc::quant::{design_bins_pooled, quantize_map, QuantizerSpec, DEFAULT_OFFSET};
use quantsc::simkit::{sample_fibers, RadioMap, ReplacementMode, Scenario};
use quantsc::Result;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{fiber_count, ModelKind};

/// Entries taken from each pooled map during bin design. Larger maps are
/// subsampled uniformly so a 1000-map pool stays in memory.
pub const POOL_ENTRIES_PER_MAP: usize = 1 << 16;

/// Pool maps use scenario seeds offset by this much, disjoint from trial seeds.
const POOL_SEED_OFFSET: u64 = 1 << 40;

const STREAM_SAMPLING: u64 = 1;
const STREAM_DITHER: u64 = 2;
const STREAM_POOL: u64 = 3;

/// Independent sub-seed `stream` of `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

/// Log-domain entries of one map, subsampled to at most
/// [`POOL_ENTRIES_PER_MAP`] values.
fn pooled_logs(map: &RadioMap, seed: u64) -> Vec<f64> {
    let t = map.tensor();
    let h = |x: f64| (x + DEFAULT_OFFSET).ln();
    if t.len() <= POOL_ENTRIES_PER_MAP {
        return t.iter().map(|&x| h(x)).collect();
    }
    let flat = t.as_slice().expect("standard layout");
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, STREAM_POOL));
    let mut idx = sample(&mut rng, flat.len(), POOL_ENTRIES_PER_MAP).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|n| h(flat[n])).collect()
}

/// Bins from `pool` maps simulated with seeds disjoint from any trial seed.
pub fn design_spec(scenario: &Scenario, bits: u32, sigma2: f64, pool: usize, seed: u64) -> Result<QuantizerSpec> {
    let logs = quantsc::par::map_range(pool, |p| {
        let s = seed.wrapping_add(POOL_SEED_OFFSET).wrapping_add(p as u64);
        scenario.with_seed(s).generate().map(|gt| pooled_logs(&gt.map, s))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let bins = design_bins_pooled(logs.iter().map(|v| v.as_slice()), bits)?;
    QuantizerSpec::new(DEFAULT_OFFSET, sigma2, bins)
}

pub enum ModelSpec<'a> {
    Btd { rank: usize, l: usize, cfg: &'a SolverConfig },
    Dgm { rank: usize, net: &'a GeneratorNet, cfg: &'a DgmConfig },
}

impl ModelSpec<'_> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Btd { .. } => ModelKind::Btd,
            ModelSpec::Dgm { .. } => ModelKind::Dgm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub lnre: f64,
    pub trace: Trace,
}

/// One end-to-end trial. The scenario seed, fiber sample, dither and solver
/// initialization all derive from `seed`.
pub fn run_trial(
    scenario: &Scenario,
    spec: &QuantizerSpec,
    n_fibers: usize,
    model: &ModelSpec<'_>,
    seed: u64,
) -> Result<TrialOutcome> {
    let sc = scenario.with_seed(seed);
    let truth = sc.generate()?;
    let omega = sample_fibers(sc.i, sc.j, n_fibers, ReplacementMode::Without, sub_seed(seed, STREAM_SAMPLING))?;
    let obs = quantize_map(&truth.map, &omega, spec, sub_seed(seed, STREAM_DITHER))?;
    let (map, trace) = match *model {
        ModelSpec::Btd { rank, l, cfg } => {
            let dims = BtdDims {
                i: sc.i,
                j: sc.j,
                k: sc.k,
                r: rank,
                l,
            };
            let cfg = SolverConfig { seed, ..cfg.clone() };
            let sol = btd_solve(&obs, spec, dims, &cfg)?;
            (sol.map, sol.trace)
        }
        ModelSpec::Dgm { rank, net, cfg } => {
            let cfg = DgmConfig { seed, ..cfg.clone() };
            let sol = dgm_solve(&obs, spec, net, rank, &cfg)?;
            (sol.map, sol.trace)
        }
    };
    Ok(TrialOutcome {
        lnre: lnre(&map, &truth.map, spec.a())?,
        trace,
    })
}

/// Convenience for a sampling fraction instead of a fiber count.
pub fn run_trial_rho(
    scenario: &Scenario,
    spec: &QuantizerSpec,
    rho: f64,
    model: &ModelSpec<'_>,
    seed: u64,
) -> Result<TrialOutcome> {
    run_trial(scenario, spec, fiber_count(rho, scenario.i, scenario.j), model, seed)
}
