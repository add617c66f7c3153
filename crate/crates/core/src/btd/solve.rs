use super::{gradients_unchecked, objective_unchecked, BtdDims, BtdFactors, SolverConfig, Want};
use crate::error::{Error, Result};
use crate::likelihood::check_observations;
use crate::optim::{run_bcd, BcdOptions, BlockProblem, Trace};
use crate::quant::{ObservationSet, QuantizerSpec};
use crate::simkit::RadioMap;

#[derive(Debug, Clone)]
pub struct BtdSolution {
    pub factors: BtdFactors,
    pub map: RadioMap,
    pub trace: Trace,
}

/// Blocks in update order: `C`, `A`, `B`.
struct Problem<'a> {
    f: BtdFactors,
    obs: &'a ObservationSet,
    spec: &'a QuantizerSpec,
    cfg: &'a SolverConfig,
}

impl BlockProblem for Problem<'_> {
    fn n_blocks(&self) -> usize {
        3
    }

    fn block(&self, b: usize) -> &[f64] {
        self.f.block_slices()[b]
    }

    fn block_mut(&mut self, b: usize) -> &mut [f64] {
        let [c, a, bb] = self.f.block_slices_mut();
        match b {
            0 => c,
            1 => a,
            _ => bb,
        }
    }

    fn nonnegative(&self, _: usize) -> bool {
        true
    }

    fn objective(&self) -> f64 {
        objective_unchecked(&self.f, self.obs, self.spec, self.cfg)
    }

    fn gradient(&self, b: usize) -> Vec<f64> {
        self.value_and_gradient(b).1
    }

    fn value_and_gradient(&self, b: usize) -> (f64, Vec<f64>) {
        let want = Want {
            c: b == 0,
            a: b == 1,
            b: b == 2,
        };
        let (value, g) = gradients_unchecked(&self.f, self.obs, self.spec, self.cfg, want);
        let flat = match b {
            0 => g.c.into_raw_vec_and_offset().0,
            1 => g.a.into_raw_vec_and_offset().0,
            _ => g.b.into_raw_vec_and_offset().0,
        };
        (value, flat)
    }
}

/// Fit nonnegative block-term factors to quantized fibers.
///
/// Each iteration takes one projected step on `C`, then `A`, then `B`.
pub fn btd_solve(
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    dims: BtdDims,
    cfg: &SolverConfig,
) -> Result<BtdSolution> {
    dims.validate()?;
    cfg.validate()?;
    if obs.n_fibers() == 0 {
        return Err(Error::invalid("need at least one observed fiber"));
    }
    check_observations(obs, dims.i, dims.j, dims.k)?;
    let mut problem = Problem {
        f: BtdFactors::init(&dims, cfg.seed)?,
        obs,
        spec,
        cfg,
    };
    let opts = BcdOptions {
        kind: cfg.optimizer,
        max_iters: cfg.max_iters,
        rel_tol: cfg.rel_tol,
        step_decay: cfg.step_decay,
        ..Default::default()
    };
    let trace = run_bcd(&mut problem, &[cfg.step_c, cfg.step_a, cfg.step_b], &opts)?;
    let factors = problem.f;
    let map = factors.to_map()?;
    Ok(BtdSolution {
        factors,
        map,
        trace,
    })
}
