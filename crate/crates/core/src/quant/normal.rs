//! Standard normal helpers that stay accurate deep in the tails.

use libm::{erf, erfc};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// `ln √(2π)`
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Below this, `Φ` is evaluated through its asymptotic expansion in log space.
const ASYMPTOTIC_CUTOFF: f64 = -30.0;

pub fn std_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn log_std_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Φ(x)`.
pub fn std_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)` for any finite or infinite `x`.
pub fn log_std_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x > 5.0 {
        (-std_cdf(-x)).ln_1p()
    } else if x > ASYMPTOTIC_CUTOFF {
        std_cdf(x).ln()
    } else {
        // Φ(x) = φ(x)/(−x) · (1 − 1/x² + 3/x⁴ − 15/x⁶ + 105/x⁸ − …)
        let z = 1.0 / (x * x);
        let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
        log_std_pdf(x) - (-x).ln() + series.ln()
    }
}

/// `P(l < Z ≤ u)` for standard normal `Z`, `l < u`.
///
/// Picks the formulation that avoids cancellation: tail differences are
/// taken in the tail they live in, and intervals straddling zero use `erf`.
pub fn interval_prob(l: f64, u: f64) -> f64 {
    debug_assert!(l <= u);
    if l >= 0.0 {
        std_cdf(-l) - std_cdf(-u)
    } else if u <= 0.0 {
        std_cdf(u) - std_cdf(l)
    } else {
        0.5 * (erf(u * FRAC_1_SQRT_2) - erf(l * FRAC_1_SQRT_2))
    }
}

/// `ln P(l < Z ≤ u)`, finite whenever `l < u` even when the probability
/// underflows.
pub fn log_interval_prob(l: f64, u: f64) -> f64 {
    debug_assert!(l <= u);
    if l == f64::NEG_INFINITY {
        return log_std_cdf(u);
    }
    if u == f64::INFINITY {
        return log_std_cdf(-l);
    }
    if l >= 0.0 {
        // mirror into the left tail
        let hi = log_std_cdf(-l);
        let lo = log_std_cdf(-u);
        hi + (-(lo - hi).exp()).ln_1p()
    } else if u <= 0.0 {
        let hi = log_std_cdf(u);
        let lo = log_std_cdf(l);
        hi + (-(lo - hi).exp()).ln_1p()
    } else {
        interval_prob(l, u).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert!((std_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((std_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((std_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((std_cdf(-5.0) - 2.866_515_718_791_939e-7).abs() < 1e-20);
    }

    #[test]
    fn log_cdf_is_continuous_at_the_asymptotic_switch() {
        let x = ASYMPTOTIC_CUTOFF;
        let direct = std_cdf(x).ln();
        let series = {
            let z = 1.0 / (x * x);
            let s = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
            log_std_pdf(x) - (-x).ln() + s.ln()
        };
        assert!((direct - series).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn log_cdf_far_tail_is_finite() {
        let v = log_std_cdf(-60.0);
        assert!(v.is_finite() && v < -1800.0);
        assert!(log_std_cdf(40.0) == 0.0 || log_std_cdf(40.0) > -1e-300);
    }

    #[test]
    fn interval_formulations_agree() {
        for &(l, u) in &[(-3.0, -1.0), (0.5, 2.5), (-0.3, 0.7), (-8.0, 8.0)] {
            let p = interval_prob(l, u);
            let naive = std_cdf(u) - std_cdf(l);
            assert!((p - naive).abs() < 1e-14);
            assert!((log_interval_prob(l, u) - p.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_tail_interval_in_log_space() {
        // both ends beyond the double-precision range of Φ
        let v = log_interval_prob(40.0, 41.0);
        let expected = log_std_cdf(-40.0);
        assert!(v.is_finite());
        assert!((v - expected).abs() < 1e-6 * expected.abs());
    }
}
