//! Link constants: worst-case log-loss `U`, worst-case score `L`, and the
//! smallest Fisher-type curvature `F`, over a range of transformed values.

use super::link::link_score;
use super::QuantizerSpec;
use crate::error::{Error, Result};

/// Fewest grid points accepted by [`compute_constants_on`].
pub const MIN_GRID_POINTS: usize = 1000;
const DEFAULT_GRID_POINTS: usize = 10_000;
/// Local refinement: rounds of re-gridding around the incumbent extremum.
const REFINE_ROUNDS: usize = 10;
const REFINE_POINTS: usize = 64;

/// Where the sup/inf over `m` is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MRange {
    /// `[h(0), h(α)]`: every value a map bounded by `α` can produce.
    Data { alpha: f64 },
    /// The wider symmetric interval `±(α + |1 − a|)/a`.
    Wide { alpha: f64 },
    Explicit(f64, f64),
}

impl MRange {
    pub fn bounds(&self, a: f64) -> Result<(f64, f64)> {
        let (lo, hi) = match *self {
            MRange::Data { alpha } => {
                check_alpha(alpha)?;
                (a.ln(), (alpha + a).ln())
            }
            MRange::Wide { alpha } => {
                check_alpha(alpha)?;
                let w = (alpha + (1.0 - a).abs()) / a;
                (-w, w)
            }
            MRange::Explicit(lo, hi) => (lo, hi),
        };
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("empty or non-finite m-range [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must be positive, got {alpha}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConstants {
    /// `sup_m max_q −ln f_q(m)`
    pub u_alpha: f64,
    /// `sup_m max_q |ḟ_q(m)| / f_q(m)`
    pub l_alpha: f64,
    /// `inf_m max_q ḟ_q(m)² / f_q(m)`; may underflow to 0 on very wide ranges.
    pub f_alpha: f64,
    pub m_range: (f64, f64),
}

/// Pointwise quantities at one `m`: (max −ln f, max |score|, ln max ḟ²/f).
fn pointwise(m: f64, spec: &QuantizerSpec) -> (f64, f64, f64) {
    let mut u = f64::NEG_INFINITY;
    let mut l = 0.0f64;
    let mut log_fisher = f64::NEG_INFINITY;
    for q in 1..=spec.levels() as u32 {
        let (score, log_f) = link_score(q, m, spec);
        u = u.max(-log_f);
        l = l.max(score.abs());
        if score != 0.0 {
            log_fisher = log_fisher.max(2.0 * score.abs().ln() + log_f);
        }
    }
    (u, l, log_fisher)
}

/// Constants over `[h(0), h(α)]` on a 10⁴-point grid.
pub fn compute_constants(spec: &QuantizerSpec, alpha: f64) -> Result<LinkConstants> {
    compute_constants_on(spec, MRange::Data { alpha }, DEFAULT_GRID_POINTS)
}

/// Grid search (endpoints included) followed by local re-gridding around the
/// best point of each extremum.
pub fn compute_constants_on(
    spec: &QuantizerSpec,
    range: MRange,
    points: usize,
) -> Result<LinkConstants> {
    if points < MIN_GRID_POINTS {
        return Err(Error::invalid(format!(
            "need at least {MIN_GRID_POINTS} grid points, got {points}"
        )));
    }
    let (lo, hi) = range.bounds(spec.a())?;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|n| if n + 1 == points { hi } else { lo + step * n as f64 })
        .collect();
    let vals = crate::par::map_slice(&grid, |&m| pointwise(m, spec));

    let refine = |pick: fn(&(f64, f64, f64)) -> f64, maximize: bool| -> f64 {
        let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
        let (mut best_m, mut best) = (grid[0], pick(&vals[0]));
        for (m, v) in grid.iter().zip(&vals) {
            if better(pick(v), best) {
                best = pick(v);
                best_m = *m;
            }
        }
        let mut half = step;
        for _ in 0..REFINE_ROUNDS {
            let a = (best_m - half).max(lo);
            let b = (best_m + half).min(hi);
            let h = (b - a) / (REFINE_POINTS - 1) as f64;
            for n in 0..REFINE_POINTS {
                let m = a + h * n as f64;
                let v = pick(&pointwise(m, spec));
                if better(v, best) {
                    best = v;
                    best_m = m;
                }
            }
            half = 2.0 * h;
        }
        best
    };

    let u_alpha = refine(|v| v.0, true);
    let l_alpha = refine(|v| v.1, true);
    let f_alpha = refine(|v| v.2, false).exp();
    if !u_alpha.is_finite() || !l_alpha.is_finite() || f_alpha.is_nan() {
        return Err(Error::Numerical("link constants are not finite".into()));
    }
    Ok(LinkConstants {
        u_alpha,
        l_alpha,
        f_alpha,
        m_range: (lo, hi),
    })
}
