//! Per-fiber likelihood pass shared by the factor models.
//!
//! Both models predict `X(i,j,:) = C · s(i,j)` where `s(i,j) ∈ R^R` holds the
//! SLF values at the fiber's location; they differ only in where `s` comes
//! from. This pass evaluates the NLL of every observed fiber and its
//! derivative with respect to the predicted entries.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::quant::{nll_entry, ObservationSet, QuantizerSpec};

pub(crate) struct FiberTerms {
    pub value: f64,
    /// SLF values `s_r(i,j)`.
    pub s: Vec<f64>,
    /// `∂NLL/∂X(i,j,k)`.
    pub g: Vec<f64>,
}

impl FiberTerms {
    /// `w_r = Σ_k g_k C(k, r)`: derivative with respect to `s_r(i,j)`.
    pub fn slf_weights(&self, c: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut w = vec![0.0; c.ncols()];
        for (k, gk) in self.g.iter().enumerate() {
            for (wr, ckr) in w.iter_mut().zip(c.row(k)) {
                *wr += gk * ckr;
            }
        }
        w
    }
}

/// Check that `obs` fits an `I × J × K` grid.
pub(crate) fn check_observations(obs: &ObservationSet, ni: usize, nj: usize, nk: usize) -> Result<()> {
    if obs.n_fibers() > 0 && obs.n_bins() != nk {
        return Err(Error::dims(format!(
            "observations have {} subbands, model has {nk}",
            obs.n_bins()
        )));
    }
    if let Some(&(i, j)) = obs.omega().locations().iter().find(|&&(i, j)| i >= ni || j >= nj) {
        return Err(Error::dims(format!("observed location ({i}, {j}) outside {ni} x {nj}")));
    }
    Ok(())
}

fn predict_fiber(c: ArrayView2<'_, f64>, s: &[f64], out: &mut [f64]) {
    for (k, x) in out.iter_mut().enumerate() {
        *x = c.row(k).iter().zip(s).map(|(ckr, sr)| ckr * sr).sum();
    }
}

/// NLL summed over all observed entries. `slf_at(i, j, s)` fills `s`.
pub(crate) fn nll_total<F>(obs: &ObservationSet, spec: &QuantizerSpec, c: ArrayView2<'_, f64>, slf_at: F) -> f64
where
    F: Fn(usize, usize, &mut [f64]) + Sync + Send,
{
    let (nk, nr) = c.dim();
    let locs = obs.omega().locations();
    let y = obs.symbols();
    crate::par::sum_range(locs.len(), |n| {
        let (i, j) = locs[n];
        let mut s = vec![0.0; nr];
        slf_at(i, j, &mut s);
        let mut x = vec![0.0; nk];
        predict_fiber(c, &s, &mut x);
        x.iter()
            .enumerate()
            .map(|(k, &xk)| nll_entry(y[[n, k]], xk, spec).value)
            .sum::<f64>()
    })
}

/// Value, SLF values and entry derivatives for every observed fiber, in
/// observation order.
pub(crate) fn fiber_terms<F>(
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    c: ArrayView2<'_, f64>,
    slf_at: F,
) -> Vec<FiberTerms>
where
    F: Fn(usize, usize, &mut [f64]) + Sync + Send,
{
    let (nk, nr) = c.dim();
    let locs = obs.omega().locations();
    let y = obs.symbols();
    crate::par::map_range(locs.len(), |n| {
        let (i, j) = locs[n];
        let mut s = vec![0.0; nr];
        slf_at(i, j, &mut s);
        let mut x = vec![0.0; nk];
        predict_fiber(c, &s, &mut x);
        let mut value = 0.0;
        let mut g = vec![0.0; nk];
        for (k, (&xk, gk)) in x.iter().zip(&mut g).enumerate() {
            let e = nll_entry(y[[n, k]], xk, spec);
            value += e.value;
            *gk = e.derivative;
        }
        FiberTerms { value, s, g }
    })
}

/// `∂NLL/∂C(k, r) = Σ_fibers g_k s_r`, row-major `K × R`.
pub(crate) fn psd_gradient(terms: &[FiberTerms], nk: usize, nr: usize) -> Vec<f64> {
    let mut out = vec![0.0; nk * nr];
    for t in terms {
        for (k, gk) in t.g.iter().enumerate() {
            for (o, sr) in out[k * nr..(k + 1) * nr].iter_mut().zip(&t.s) {
                *o += gk * sr;
            }
        }
    }
    out
}
