//! Block-term recovery: `X = Σ_r (A_r B_rᵀ) ∘ c_r` with nonnegative factors,
//! fitted to quantized fibers by regularized maximum likelihood.

mod io;
mod solve;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{check_observations, fiber_terms, nll_total, psd_gradient};
use crate::optim::OptimizerKind;
use crate::quant::{ObservationSet, QuantizerSpec};
use crate::simkit::{compose, Psd, RadioMap, Slf};

pub use io::{load_factors, save_factors, FactorManifest};
pub use solve::{btd_solve, BtdSolution};

/// Magnitude of the positive perturbation added to the zero start of `A`, `B`.
pub const INIT_PERTURBATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BtdDims {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

impl BtdDims {
    pub fn validate(&self) -> Result<()> {
        if [self.i, self.j, self.k, self.r, self.l].contains(&0) {
            return Err(Error::invalid("I, J, K, R and L must all be at least 1"));
        }
        Ok(())
    }
}

/// Nonnegative block-term factors. `a` is `R × I × L`, `b` is `R × J × L`
/// and `c` is `K × R` (column `r` is the PSD of emitter `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct BtdFactors {
    a: Array3<f64>,
    b: Array3<f64>,
    c: Array2<f64>,
}

impl BtdFactors {
    pub fn new(a: Array3<f64>, b: Array3<f64>, c: Array2<f64>) -> Result<Self> {
        let (ra, _, la) = a.dim();
        let (rb, _, lb) = b.dim();
        if ra != rb || la != lb || c.ncols() != ra {
            return Err(Error::dims(format!(
                "A is {:?}, B is {:?}, C is {:?}",
                a.dim(),
                b.dim(),
                c.dim()
            )));
        }
        let all = a.iter().chain(b.iter()).chain(c.iter());
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("factor entries must be finite and nonnegative"));
        }
        Ok(Self {
            a: a.as_standard_layout().into_owned(),
            b: b.as_standard_layout().into_owned(),
            c: c.as_standard_layout().into_owned(),
        })
    }

    /// Solver start: `A`, `B` at zero plus a uniform `[0, 10⁻⁶]` nudge, `C`
    /// uniform on `[0, 1]`.
    pub fn init(dims: &BtdDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_simple_fn((dims.k, dims.r), || rng.random::<f64>());
        let a = Array3::from_shape_simple_fn((dims.r, dims.i, dims.l), || {
            INIT_PERTURBATION * rng.random::<f64>()
        });
        let b = Array3::from_shape_simple_fn((dims.r, dims.j, dims.l), || {
            INIT_PERTURBATION * rng.random::<f64>()
        });
        Ok(Self { a, b, c })
    }

    pub fn dims(&self) -> BtdDims {
        let (r, i, l) = self.a.dim();
        BtdDims {
            i,
            j: self.b.dim().1,
            k: self.c.nrows(),
            r,
            l,
        }
    }

    pub fn a(&self) -> &Array3<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array3<f64> {
        &self.b
    }

    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn a_r(&self, r: usize) -> ArrayView2<'_, f64> {
        self.a.index_axis(Axis(0), r)
    }

    pub fn b_r(&self, r: usize) -> ArrayView2<'_, f64> {
        self.b.index_axis(Axis(0), r)
    }

    /// `A_r B_rᵀ`.
    pub fn slf(&self, r: usize) -> Array2<f64> {
        self.a_r(r).dot(&self.b_r(r).t())
    }

    fn slf_values(&self, i: usize, j: usize, s: &mut [f64]) {
        let nl = self.a.dim().2;
        let a = self.a.as_slice().expect("standard layout");
        let b = self.b.as_slice().expect("standard layout");
        let (ni, nj) = (self.a.dim().1, self.b.dim().1);
        for (r, sr) in s.iter_mut().enumerate() {
            let ar = &a[(r * ni + i) * nl..(r * ni + i + 1) * nl];
            let br = &b[(r * nj + j) * nl..(r * nj + j + 1) * nl];
            *sr = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        }
    }

    /// Full reconstruction `Σ_r (A_r B_rᵀ) ∘ c_r`.
    pub fn to_map(&self) -> Result<RadioMap> {
        let r = self.c.ncols();
        let slfs = (0..r).map(|r| Slf::new(self.slf(r))).collect::<Result<Vec<_>>>()?;
        let psds = (0..r)
            .map(|r| Psd::new(self.c.column(r).to_owned()))
            .collect::<Result<Vec<_>>>()?;
        compose(&slfs, &psds)
    }

    pub(crate) fn block_slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.c.as_slice_mut().expect("standard layout"),
            self.a.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
        ]
    }

    pub(crate) fn block_slices(&self) -> [&[f64]; 3] {
        [
            self.c.as_slice().expect("standard layout"),
            self.a.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
        ]
    }
}

/// Regularization weights, step sizes and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Weight on `‖A‖_F²` (summed over all `r`).
    pub lambda1: f64,
    /// Weight on `‖B‖_F²`.
    pub lambda2: f64,
    /// Weight on `‖C‖_F²`.
    pub lambda3: f64,
    pub step_a: f64,
    pub step_b: f64,
    pub step_c: f64,
    pub optimizer: OptimizerKind,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Per-iteration multiplicative decay of all step sizes.
    pub step_decay: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e-3,
            lambda2: 1e-3,
            lambda3: 1e-3,
            step_a: 0.006,
            step_b: 0.006,
            step_c: 0.003,
            optimizer: OptimizerKind::Adaptive,
            max_iters: 300,
            rel_tol: 1e-3,
            step_decay: 1.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda1, self.lambda2, self.lambda3];
        if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::invalid("regularization weights must be nonnegative"));
        }
        let steps = [self.step_a, self.step_b, self.step_c];
        if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        if self.max_iters == 0 || !(self.rel_tol > 0.0) {
            return Err(Error::invalid("need max_iters >= 1 and rel_tol > 0"));
        }
        Ok(())
    }
}

fn check_fit(f: &BtdFactors, obs: &ObservationSet) -> Result<()> {
    let d = f.dims();
    check_observations(obs, d.i, d.j, d.k)
}

/// Predicted fibers at `locations`, one row of `K` values per location.
pub fn btd_predict(f: &BtdFactors, locations: &[(usize, usize)]) -> Result<Array2<f64>> {
    let d = f.dims();
    if let Some(&(i, j)) = locations.iter().find(|&&(i, j)| i >= d.i || j >= d.j) {
        return Err(Error::dims(format!("location ({i}, {j}) outside {} x {}", d.i, d.j)));
    }
    let mut out = Array2::zeros((locations.len(), d.k));
    let mut s = vec![0.0; d.r];
    for (row, &(i, j)) in out.rows_mut().into_iter().zip(locations) {
        f.slf_values(i, j, &mut s);
        for (x, crow) in row.into_iter().zip(f.c.rows()) {
            *x = crow.iter().zip(&s).map(|(c, s)| c * s).sum();
        }
    }
    Ok(out)
}

fn sq_norm<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum()
}

fn regularizer(f: &BtdFactors, cfg: &SolverConfig) -> f64 {
    cfg.lambda1 * sq_norm(&f.a) + cfg.lambda2 * sq_norm(&f.b) + cfg.lambda3 * sq_norm(&f.c)
}

fn objective_unchecked(f: &BtdFactors, obs: &ObservationSet, spec: &QuantizerSpec, cfg: &SolverConfig) -> f64 {
    nll_total(obs, spec, f.c.view(), |i, j, s| f.slf_values(i, j, s)) + regularizer(f, cfg)
}

/// Observed-entry NLL plus `λ₁‖A‖_F² + λ₂‖B‖_F² + λ₃‖C‖_F²`.
pub fn btd_objective(
    f: &BtdFactors,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_fit(f, obs)?;
    Ok(objective_unchecked(f, obs, spec, cfg))
}

/// Gradients of [`btd_objective`], shaped like the factors.
#[derive(Debug, Clone, PartialEq)]
pub struct BtdGradients {
    pub a: Array3<f64>,
    pub b: Array3<f64>,
    pub c: Array2<f64>,
}

/// Which gradient blocks to assemble.
#[derive(Clone, Copy)]
pub(crate) struct Want {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

pub(crate) fn gradients_unchecked(
    f: &BtdFactors,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &SolverConfig,
    want: Want,
) -> (f64, BtdGradients) {
    let d = f.dims();
    let terms = fiber_terms(obs, spec, f.c.view(), |i, j, s| f.slf_values(i, j, s));
    let value = terms.iter().map(|t| t.value).sum::<f64>() + regularizer(f, cfg);
    let mut ga = Array3::zeros(if want.a { (d.r, d.i, d.l) } else { (0, 0, 0) });
    let mut gb = Array3::zeros(if want.b { (d.r, d.j, d.l) } else { (0, 0, 0) });
    if want.a || want.b {
        for (t, &(i, j)) in terms.iter().zip(obs.omega().locations()) {
            let w = t.slf_weights(f.c.view());
            for (r, &wr) in w.iter().enumerate() {
                if wr == 0.0 {
                    continue;
                }
                if want.a {
                    let mut row = ga.slice_mut(ndarray::s![r, i, ..]);
                    row.scaled_add(wr, &f.b.slice(ndarray::s![r, j, ..]));
                }
                if want.b {
                    let mut row = gb.slice_mut(ndarray::s![r, j, ..]);
                    row.scaled_add(wr, &f.a.slice(ndarray::s![r, i, ..]));
                }
            }
        }
        if want.a {
            ga.scaled_add(2.0 * cfg.lambda1, &f.a);
        }
        if want.b {
            gb.scaled_add(2.0 * cfg.lambda2, &f.b);
        }
    }
    let gc = if want.c {
        let mut gc = Array2::from_shape_vec((d.k, d.r), psd_gradient(&terms, d.k, d.r))
            .expect("gradient shape");
        gc.scaled_add(2.0 * cfg.lambda3, &f.c);
        gc
    } else {
        Array2::zeros((0, 0))
    };
    (value, BtdGradients { a: ga, b: gb, c: gc })
}

/// Exact gradients of the objective with respect to `A`, `B` and `C`.
pub fn btd_gradients(
    f: &BtdFactors,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &SolverConfig,
) -> Result<BtdGradients> {
    check_fit(f, obs)?;
    let want = Want {
        a: true,
        b: true,
        c: true,
    };
    Ok(gradients_unchecked(f, obs, spec, cfg, want).1)
}

#[cfg(test)]
mod tests;
