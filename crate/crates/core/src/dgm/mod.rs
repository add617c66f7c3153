//! Generative-prior recovery: SLFs are outputs `g(z_r)` of a frozen dense
//! generator, so only the latent codes `Z` and the PSDs `C` are fitted.

mod net;
mod weights;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{check_observations, fiber_terms, nll_total, psd_gradient};
use crate::optim::{run_bcd, BcdOptions, BlockProblem, OptimizerKind, Trace};
use crate::quant::{ObservationSet, QuantizerSpec};
use crate::simkit::{compose, Psd, RadioMap, Slf};

pub use net::{gen_forward, gen_vjp, lipschitz_product, spectral_norm, Activation, DenseLayer, GeneratorNet};
pub use weights::{
    generator_from_parts, load_generator, save_generator, GeneratorManifest, LayerSpec, WeightEncoding,
    FORMAT_NAME, FORMAT_VERSION,
};

/// Latent codes (`R × D`, row `r` is `z_r`) and nonnegative PSDs (`K × R`).
#[derive(Debug, Clone, PartialEq)]
pub struct DgmVars {
    z: Array2<f64>,
    c: Array2<f64>,
}

impl DgmVars {
    pub fn new(z: Array2<f64>, c: Array2<f64>) -> Result<Self> {
        if z.nrows() != c.ncols() {
            return Err(Error::dims(format!("{} latent codes for {} PSDs", z.nrows(), c.ncols())));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent codes must be finite"));
        }
        if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("PSD entries must be finite and nonnegative"));
        }
        Ok(Self {
            z: z.as_standard_layout().into_owned(),
            c: c.as_standard_layout().into_owned(),
        })
    }

    /// `Z ~ N(0, 1)` entrywise, `C ~ U[0, 1]` entrywise.
    pub fn init(r: usize, d: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_simple_fn((k, r), || rand::Rng::random::<f64>(&mut rng));
        let z = draw_latents(r, d, &mut rng);
        Self { z, c }
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn n_emitters(&self) -> usize {
        self.z.nrows()
    }
}

fn draw_latents(r: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, d), || StandardNormal.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgmConfig {
    /// Weight on `‖Z‖_F²`.
    pub mu1: f64,
    /// Weight on `‖C‖_F²`.
    pub mu2: f64,
    pub step_z: f64,
    pub step_c: f64,
    pub optimizer: OptimizerKind,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_decay: f64,
    pub seed: u64,
}

impl Default for DgmConfig {
    fn default() -> Self {
        Self {
            mu1: 1e-3,
            mu2: 1e-3,
            step_z: 0.006,
            step_c: 0.003,
            optimizer: OptimizerKind::Adaptive,
            max_iters: 300,
            rel_tol: 1e-3,
            step_decay: 1.0,
            seed: 0,
        }
    }
}

impl DgmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 >= 0.0 && self.mu2 >= 0.0) || !self.mu1.is_finite() || !self.mu2.is_finite() {
            return Err(Error::invalid("regularization weights must be nonnegative"));
        }
        if !(self.step_z > 0.0 && self.step_c > 0.0) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        if self.max_iters == 0 || !(self.rel_tol > 0.0) {
            return Err(Error::invalid("need max_iters >= 1 and rel_tol > 0"));
        }
        Ok(())
    }
}

/// `g(z_r)` for every `r`, evaluated in parallel.
fn slfs_of(net: &GeneratorNet, z: &Array2<f64>) -> Vec<Array2<f64>> {
    let rows: Vec<Vec<f64>> = z.rows().into_iter().map(|r| r.to_vec()).collect();
    crate::par::map_slice(&rows, |zr| gen_forward(net, zr).expect("latent size checked"))
}

fn check_fit(vars: &DgmVars, net: &GeneratorNet, obs: &ObservationSet) -> Result<()> {
    if vars.z.ncols() != net.latent_dim() {
        return Err(Error::dims(format!(
            "latent codes of length {}, generator expects {}",
            vars.z.ncols(),
            net.latent_dim()
        )));
    }
    let (ni, nj) = net.grid();
    check_observations(obs, ni, nj, vars.c.nrows())
}

fn sq_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

fn objective_unchecked(vars: &DgmVars, net: &GeneratorNet, obs: &ObservationSet, spec: &QuantizerSpec, cfg: &DgmConfig) -> f64 {
    let slfs = slfs_of(net, &vars.z);
    let nll = nll_total(obs, spec, vars.c.view(), |i, j, s| {
        for (sr, g) in s.iter_mut().zip(&slfs) {
            *sr = g[[i, j]];
        }
    });
    nll + cfg.mu1 * sq_norm(&vars.z) + cfg.mu2 * sq_norm(&vars.c)
}

/// Observed-entry NLL of `X = Σ_r g(z_r) ∘ c_r` plus `μ₁‖Z‖_F² + μ₂‖C‖_F²`.
pub fn dgm_objective(
    vars: &DgmVars,
    net: &GeneratorNet,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &DgmConfig,
) -> Result<f64> {
    check_fit(vars, net, obs)?;
    Ok(objective_unchecked(vars, net, obs, spec, cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgmGradients {
    pub z: Array2<f64>,
    pub c: Array2<f64>,
}

fn gradients_unchecked(
    vars: &DgmVars,
    net: &GeneratorNet,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &DgmConfig,
    want_z: bool,
    want_c: bool,
) -> (f64, DgmGradients) {
    let (ni, nj) = net.grid();
    let (nk, nr) = vars.c.dim();
    let slfs = slfs_of(net, &vars.z);
    let terms = fiber_terms(obs, spec, vars.c.view(), |i, j, s| {
        for (sr, g) in s.iter_mut().zip(&slfs) {
            *sr = g[[i, j]];
        }
    });
    let value = terms.iter().map(|t| t.value).sum::<f64>() + cfg.mu1 * sq_norm(&vars.z) + cfg.mu2 * sq_norm(&vars.c);

    let gz = if want_z {
        // upstream U_r(i, j) = Σ_k ∂NLL/∂X(i,j,k) · C(k, r)
        let mut upstream = vec![Array2::<f64>::zeros((ni, nj)); nr];
        for (t, &(i, j)) in terms.iter().zip(obs.omega().locations()) {
            for (u, w) in upstream.iter_mut().zip(t.slf_weights(vars.c.view())) {
                u[[i, j]] += w;
            }
        }
        let rows = crate::par::map_range(nr, |r| {
            let z = vars.z.row(r).to_vec();
            gen_vjp(net, &z, upstream[r].view()).expect("dims checked")
        });
        let mut gz = Array2::from_shape_vec((nr, net.latent_dim()), rows.concat()).expect("shape");
        gz.scaled_add(2.0 * cfg.mu1, &vars.z);
        gz
    } else {
        Array2::zeros((0, 0))
    };
    let gc = if want_c {
        let mut gc = Array2::from_shape_vec((nk, nr), psd_gradient(&terms, nk, nr)).expect("shape");
        gc.scaled_add(2.0 * cfg.mu2, &vars.c);
        gc
    } else {
        Array2::zeros((0, 0))
    };
    (value, DgmGradients { z: gz, c: gc })
}

/// Exact gradients with respect to `Z` (through the generator) and `C`.
pub fn dgm_gradients(
    vars: &DgmVars,
    net: &GeneratorNet,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &DgmConfig,
) -> Result<DgmGradients> {
    check_fit(vars, net, obs)?;
    Ok(gradients_unchecked(vars, net, obs, spec, cfg, true, true).1)
}

/// Full reconstruction `Σ_r g(z_r) ∘ c_r`.
pub fn dgm_reconstruct(vars: &DgmVars, net: &GeneratorNet) -> Result<RadioMap> {
    if vars.z.ncols() != net.latent_dim() {
        return Err(Error::dims("latent codes do not match the generator"));
    }
    let slfs = slfs_of(net, &vars.z).into_iter().map(Slf::new).collect::<Result<Vec<_>>>()?;
    let psds = vars
        .c
        .axis_iter(Axis(1))
        .map(|c| Psd::new(c.to_owned()))
        .collect::<Result<Vec<_>>>()?;
    compose(&slfs, &psds)
}

#[derive(Debug, Clone)]
pub struct DgmSolution {
    pub vars: DgmVars,
    pub map: RadioMap,
    pub trace: Trace,
}

/// Blocks in update order: `C` (projected), then `Z` (free).
struct Problem<'a> {
    vars: DgmVars,
    net: &'a GeneratorNet,
    obs: &'a ObservationSet,
    spec: &'a QuantizerSpec,
    cfg: &'a DgmConfig,
}

impl BlockProblem for Problem<'_> {
    fn n_blocks(&self) -> usize {
        2
    }

    fn block(&self, b: usize) -> &[f64] {
        let m = if b == 0 { &self.vars.c } else { &self.vars.z };
        m.as_slice().expect("standard layout")
    }

    fn block_mut(&mut self, b: usize) -> &mut [f64] {
        let m = if b == 0 { &mut self.vars.c } else { &mut self.vars.z };
        m.as_slice_mut().expect("standard layout")
    }

    fn nonnegative(&self, b: usize) -> bool {
        b == 0
    }

    fn objective(&self) -> f64 {
        objective_unchecked(&self.vars, self.net, self.obs, self.spec, self.cfg)
    }

    fn gradient(&self, b: usize) -> Vec<f64> {
        self.value_and_gradient(b).1
    }

    fn value_and_gradient(&self, b: usize) -> (f64, Vec<f64>) {
        let (v, g) = gradients_unchecked(&self.vars, self.net, self.obs, self.spec, self.cfg, b == 1, b == 0);
        let m = if b == 0 { g.c } else { g.z };
        (v, m.into_raw_vec_and_offset().0)
    }

    /// Fresh latent draw from an incremented seed; `C` keeps its restored start.
    fn on_restart(&mut self, attempt: u32) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(attempt as u64));
        self.vars.z = draw_latents(self.vars.z.nrows(), self.vars.z.ncols(), &mut rng);
    }
}

/// Fit latent codes and PSDs of `r` emitters to quantized fibers.
pub fn dgm_solve(
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    net: &GeneratorNet,
    r: usize,
    cfg: &DgmConfig,
) -> Result<DgmSolution> {
    cfg.validate()?;
    if r == 0 {
        return Err(Error::invalid("R must be at least 1"));
    }
    if obs.n_fibers() == 0 {
        return Err(Error::invalid("need at least one observed fiber"));
    }
    let k = obs.n_bins();
    let vars = DgmVars::init(r, net.latent_dim(), k, cfg.seed);
    check_fit(&vars, net, obs)?;
    let mut problem = Problem {
        vars,
        net,
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
    let trace = run_bcd(&mut problem, &[cfg.step_c, cfg.step_z], &opts)?;
    let vars = problem.vars;
    let map = dgm_reconstruct(&vars, net)?;
    Ok(DgmSolution { vars, map, trace })
}
