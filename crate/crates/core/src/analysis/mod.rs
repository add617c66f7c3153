//! Reconstruction metrics and recoverability-bound diagnostics.
//!
//! The bound calculators evaluate closed-form guarantees for the global
//! maximum-likelihood estimate. Solvers are not guaranteed to reach that
//! optimum, so the bounds are reported next to achieved errors rather than
//! asserted against them.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{link_log_prob, LinkConstants, QuantizerSpec};
use crate::simkit::RadioMap;

/// Log-domain normalized reconstruction error
/// `‖h(est) − h(truth)‖_F² / ‖h(truth)‖_F²` with `h(x) = ln(x + a)`.
pub fn lnre(est: &RadioMap, truth: &RadioMap, a: f64) -> Result<f64> {
    if est.dims() != truth.dims() {
        return Err(Error::dims(format!("{:?} vs {:?}", est.dims(), truth.dims())));
    }
    if !(a > 0.0) {
        return Err(Error::invalid("offset a must be positive"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&e, &t) in est.tensor().iter().zip(truth.tensor()) {
        let ht = (t + a).ln();
        let d = (e + a).ln() - ht;
        num += d * d;
        den += ht * ht;
    }
    if den == 0.0 {
        return Err(Error::Degenerate("transformed ground truth is identically zero".into()));
    }
    Ok(num / den)
}

/// Problem sizes and model-class radii entering the bounds. `l` is used by
/// the block-term model only; `d`, `p`, `q` by the generative model only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Number of observed fibers.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "L", default)]
    pub l: usize,
    /// Latent dimension.
    #[serde(rename = "D", default)]
    pub d: usize,
    /// Lipschitz product of the generator.
    #[serde(rename = "P", default)]
    pub p: f64,
    /// Latent-ball radius.
    #[serde(default)]
    pub q: f64,
    pub beta: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub a: f64,
    pub delta: f64,
    pub nu: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::invalid("K and N must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        if !(self.beta > 0.0 && self.kappa > 0.0 && self.alpha > 0.0 && self.a > 0.0) {
            return Err(Error::invalid("beta, kappa, alpha and a must be positive"));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::invalid("nu must be nonnegative"));
        }
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..*self }
    }
}

fn ln_checked(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(Error::invalid(format!("log of non-positive argument {x} in {what}")))
    }
}

fn sqrt_checked(x: f64, what: &str) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else {
        Err(Error::invalid(format!("negative radicand {x} in {what}")))
    }
}

/// Complexity term for the block-term model:
/// `3(√(((I+J)L+K)·ln(3√R(β+κ))) + √(K ln(κ/2) + (I+J)L ln β))`.
pub fn tau_btd(p: &BoundParams) -> Result<f64> {
    let ij = (p.i + p.j) as f64;
    let (k, l, r) = (p.k as f64, p.l as f64, p.r as f64);
    let first = (ij * l + k) * ln_checked(3.0 * r.sqrt() * (p.beta + p.kappa), "tau_btd")?;
    let second = k * ln_checked(p.kappa / 2.0, "tau_btd")? + ij * l * ln_checked(p.beta, "tau_btd")?;
    Ok(3.0 * (sqrt_checked(first, "tau_btd")? + sqrt_checked(second, "tau_btd")?))
}

/// Complexity term for the generative model:
/// `3√(K ln(1.5√R κ(β+κ)) + D ln(3√R P q(β+κ)))`.
pub fn tau_dgm(p: &BoundParams) -> Result<f64> {
    let (k, d, sr) = (p.k as f64, p.d as f64, (p.r as f64).sqrt());
    let bk = p.beta + p.kappa;
    let mut radicand = k * ln_checked(1.5 * sr * p.kappa * bk, "tau_dgm")?;
    if p.d > 0 {
        radicand += d * ln_checked(3.0 * sr * p.p * p.q * bk, "tau_dgm")?;
    }
    Ok(3.0 * sqrt_checked(radicand, "tau_dgm")?)
}

/// `C₁ = 4(α + a)² / F`.
pub fn c1(p: &BoundParams, c: &LinkConstants) -> f64 {
    4.0 * (p.alpha + p.a).powi(2) / c.f_alpha
}

/// `C₂ = L / a`.
pub fn c2(p: &BoundParams, c: &LinkConstants) -> f64 {
    c.l_alpha / p.a
}

/// Upper bound on the per-entry squared log-domain error of the global
/// likelihood maximizer, holding with probability at least `1 − 2δ`:
///
/// `8C₁C₂(1+τ)/K·√(R/N) + U C₁√(ln(1/δ)/(2N)) + U C₁√(8 ln(2/δ)/N) + C₁C₂ν`.
///
/// Each `N`-dependent term is a constant times `√(x/N)`, so quadrupling `N`
/// halves the `ν = 0` bound exactly in floating point.
pub fn error_bound(p: &BoundParams, tau: f64, constants: &LinkConstants) -> Result<f64> {
    p.validate()?;
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau must be nonnegative"));
    }
    let (c1, c2) = (c1(p, constants), c2(p, constants));
    let u = constants.u_alpha;
    let n = p.n as f64;
    let model = 8.0 * c1 * c2 * (1.0 + tau) / p.k as f64 * (p.r as f64 / n).sqrt();
    let conf1 = u * c1 * ((1.0 / p.delta).ln() / (2.0 * n)).sqrt();
    let conf2 = u * c1 * (8.0 * (2.0 / p.delta).ln() / n).sqrt();
    Ok(model + conf1 + conf2 + c1 * c2 * p.nu)
}

/// Log covering number of the block-term class at radius `eps`:
/// `((I+J)L+K)R ln(3(κ+β)R/ε) + (I+J)LR ln β + RK ln(κ/2)`.
pub fn log_covering_btd(p: &BoundParams, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if p.r == 0 {
        return Ok(0.0);
    }
    let (ij, k, l, r) = ((p.i + p.j) as f64, p.k as f64, p.l as f64, p.r as f64);
    let what = "log_covering_btd";
    Ok((ij * l + k) * r * ln_checked(3.0 * (p.kappa + p.beta) * r / eps, what)?
        + ij * l * r * ln_checked(p.beta, what)?
        + r * k * ln_checked(p.kappa / 2.0, what)?)
}

/// Log covering number of the generative class at radius `eps`:
/// `R(K+D) ln(3R(β+κ)/ε) + RK ln(κ/2) + RD ln(Pq)`.
pub fn log_covering_dgm(p: &BoundParams, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if p.r == 0 {
        return Ok(0.0);
    }
    let (k, d, r) = (p.k as f64, p.d as f64, p.r as f64);
    let what = "log_covering_dgm";
    let mut v = r * (k + d) * ln_checked(3.0 * r * (p.beta + p.kappa) / eps, what)?
        + r * k * ln_checked(p.kappa / 2.0, what)?;
    if p.d > 0 {
        v += r * d * ln_checked(p.p * p.q, what)?;
    }
    Ok(v)
}

/// Per-entry averaged divergences between the symbol distributions induced
/// by two transformed tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergences {
    /// `KL(truth ‖ est)`.
    pub kl: f64,
    /// Squared Hellinger distance `Σ_q (√f_q(est) − √f_q(truth))²`.
    pub hellinger2: f64,
}

/// Average over entries of the KL divergence and squared Hellinger distance
/// between `f(m_truth)` and `f(m_est)`. Logs are taken of exactly computed
/// log-probabilities, so no probability floor is needed.
pub fn empirical_kl(m_est: &Array3<f64>, m_truth: &Array3<f64>, spec: &QuantizerSpec) -> Result<Divergences> {
    if m_est.dim() != m_truth.dim() {
        return Err(Error::dims(format!("{:?} vs {:?}", m_est.dim(), m_truth.dim())));
    }
    let count = m_est.len();
    if count == 0 {
        return Err(Error::invalid("empty tensors"));
    }
    let est: Vec<f64> = m_est.iter().copied().collect();
    let truth: Vec<f64> = m_truth.iter().copied().collect();
    let levels = spec.levels() as u32;
    let per = crate::par::map_range(count, |n| {
        let (mut kl, mut h2) = (0.0, 0.0);
        for q in 1..=levels {
            let lt = link_log_prob(q, truth[n], spec);
            let le = link_log_prob(q, est[n], spec);
            let pt = lt.exp();
            if pt > 0.0 {
                kl += pt * (lt - le);
            }
            let d = (0.5 * le).exp() - (0.5 * lt).exp();
            h2 += d * d;
        }
        (kl, h2)
    });
    let (kl, h2) = per.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    Ok(Divergences {
        kl: kl / count as f64,
        hellinger2: h2 / count as f64,
    })
}

#[cfg(test)]
mod tests;
