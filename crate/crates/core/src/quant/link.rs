//! Link function `f_q(m) = Φ((b_q − m)/σ) − Φ((b_{q−1} − m)/σ)` and the
//! per-entry negative log-likelihood.
//!
//! Everything that ends up inside a logarithm or a ratio is evaluated in log
//! space, so the score `ḟ_q / f_q` stays finite even when `f_q` underflows.

use super::normal::{interval_prob, log_interval_prob, log_std_pdf, std_pdf};
use super::QuantizerSpec;

fn standardized(q: u32, m: f64, spec: &QuantizerSpec) -> (f64, f64) {
    let (lo, hi) = spec.interval(q);
    let s = spec.sigma();
    ((lo - m) / s, (hi - m) / s)
}

/// `f_q(m)`: probability of reporting symbol `q` when the transformed value is `m`.
pub fn link_prob(q: u32, m: f64, spec: &QuantizerSpec) -> f64 {
    let (l, u) = standardized(q, m, spec);
    interval_prob(l, u)
}

/// `ln f_q(m)`.
pub fn link_log_prob(q: u32, m: f64, spec: &QuantizerSpec) -> f64 {
    let (l, u) = standardized(q, m, spec);
    log_interval_prob(l, u)
}

/// `ḟ_q(m) = (φ((b_{q−1} − m)/σ) − φ((b_q − m)/σ)) / σ`.
pub fn link_grad(q: u32, m: f64, spec: &QuantizerSpec) -> f64 {
    let (l, u) = standardized(q, m, spec);
    (std_pdf(l) - std_pdf(u)) / spec.sigma()
}

/// Below this probability the score is evaluated in log space.
const LINEAR_SCORE_MIN_PROB: f64 = 1e-200;

/// Score `ḟ_q(m) / f_q(m)` together with `ln f_q(m)`.
pub fn link_score(q: u32, m: f64, spec: &QuantizerSpec) -> (f64, f64) {
    let (l, u) = standardized(q, m, spec);
    let density = |x: f64| if x.is_finite() { std_pdf(x) } else { 0.0 };
    let f = interval_prob(l, u);
    if f > LINEAR_SCORE_MIN_PROB {
        // near-certain bins: keep the relative accuracy of −ln f ≈ 1 − f
        let log_f = if f > 0.9 { log_interval_prob(l, u) } else { f.ln() };
        return ((density(l) - density(u)) / (spec.sigma() * f), log_f);
    }
    let log_f = log_interval_prob(l, u);
    // φ(±∞) = 0 contributes nothing
    let term = |x: f64| {
        if x.is_finite() {
            (log_std_pdf(x) - log_f).exp()
        } else {
            0.0
        }
    };
    ((term(l) - term(u)) / spec.sigma(), log_f)
}

/// Value and derivative of `−ln f_q(h(x))` with respect to `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllEntry {
    pub value: f64,
    pub derivative: f64,
}

/// `−ln f_q(h(x))` and `d/dx = −(ḟ_q/f_q)(h(x)) / (x + a)`.
///
/// `x` is clamped at zero: predictions can touch the boundary of the
/// nonnegative orthant but never leave it.
pub fn nll_entry(q: u32, x: f64, spec: &QuantizerSpec) -> NllEntry {
    let xa = x.max(0.0) + spec.a();
    let (score, log_f) = link_score(q, xa.ln(), spec);
    NllEntry {
        value: -log_f,
        derivative: -score / xa,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> QuantizerSpec {
        QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap()
    }

    fn multi(sigma2: f64) -> QuantizerSpec {
        QuantizerSpec::new(1e-6, sigma2, vec![-8.0, -5.0, -3.5, -2.0, -1.0, 0.0, 1.5]).unwrap()
    }

    #[test]
    fn symmetric_binary_link() {
        let s = binary();
        assert!((link_prob(1, 0.0, &s) - 0.5).abs() < 1e-16);
        assert!((link_prob(2, 0.0, &s) - 0.5).abs() < 1e-16);
        assert!((link_prob(1, 1.0, &s) - 0.158_655_253_931_457).abs() < 1e-12);
        assert!((link_grad(1, 0.0, &s) + 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let s = multi(0.7);
        for t in 0..1000 {
            let m = -12.0 + 15.0 * t as f64 / 999.0;
            let total: f64 = (1..=s.levels() as u32).map(|q| link_prob(q, m, &s)).sum();
            assert!((total - 1.0).abs() < 1e-12, "m = {m}: {total}");
        }
    }

    #[test]
    fn grad_vanishes_at_bin_midpoint() {
        let s = multi(1.3);
        // bin 4 is (-3.5, -2.0]
        assert!(link_grad(4, -2.75, &s).abs() < 1e-15);
    }

    #[test]
    fn grad_matches_central_difference() {
        let s = multi(1.7);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for t in 0..400 {
            let m = -11.0 + 13.0 * t as f64 / 399.0;
            for q in 1..=s.levels() as u32 {
                let fd = (link_prob(q, m + h, &s) - link_prob(q, m - h, &s)) / (2.0 * h);
                let g = link_grad(q, m, &s);
                if g.abs() > 1e-8 {
                    worst = worst.max((fd - g).abs() / g.abs());
                }
            }
        }
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn score_matches_ratio_where_representable() {
        let s = multi(0.5);
        for t in 0..200 {
            let m = -10.0 + 12.0 * t as f64 / 199.0;
            for q in 1..=s.levels() as u32 {
                let f = link_prob(q, m, &s);
                if f > 1e-200 {
                    let (score, log_f) = link_score(q, m, &s);
                    let ratio = link_grad(q, m, &s) / f;
                    assert!((score - ratio).abs() <= 1e-8 * ratio.abs().max(1.0));
                    assert!((log_f - f.ln()).abs() <= 1e-10 * f.ln().abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn score_finite_when_probability_underflows() {
        let s = QuantizerSpec::new(1e-6, 0.01, vec![0.0]).unwrap();
        let (score, log_f) = link_score(2, -100.0, &s);
        assert!(score.is_finite() && log_f.is_finite());
        assert!(score > 0.0);
        assert_eq!(link_prob(2, -100.0, &s), 0.0);
    }

    #[test]
    fn nll_of_half_is_ln_two() {
        let s = QuantizerSpec::new(1e-6, 1.0, vec![(1.0f64 + 1e-6).ln()]).unwrap();
        let e = nll_entry(1, 1.0, &s);
        assert!((e.value - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn nll_derivative_matches_finite_difference() {
        let s = multi(1.7);
        let mut worst: f64 = 0.0;
        for t in 0..60 {
            let x = 10f64.powf(-3.0 + 4.0 * t as f64 / 59.0);
            for q in 1..=s.levels() as u32 {
                let h = 1e-6 * x;
                let fd = (nll_entry(q, x + h, &s).value - nll_entry(q, x - h, &s).value) / (2.0 * h);
                let d = nll_entry(q, x, &s).derivative;
                if d.abs() > 1e-10 {
                    worst = worst.max((fd - d).abs() / d.abs());
                }
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }
}
