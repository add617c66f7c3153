//! Equal-occupancy bin design from the empirical CDF of transformed data.
//!
//! For `B` bits there are `2^B` levels and `2^B − 1` interior boundaries; the
//! `i`-th boundary is the smallest sample value `m` with `i / 2^B ≤ F(m)`.

use crate::error::{Error, Result};

pub const MAX_BITS: u32 = 16;

/// Interior boundaries for `bits`-bit quantization of `samples`.
///
/// Heavy ties can make consecutive quantiles coincide; such a boundary is
/// moved up to the next distinct sample value so the result stays strictly
/// increasing.
pub fn design_bins(samples: &[f64], bits: u32) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("bin design needs at least one sample"));
    }
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("bits must be in 1..={MAX_BITS}, got {bits}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let levels = 1usize << bits;
    let n_boundaries = levels - 1;
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] < w[1]).count();
    if distinct <= n_boundaries {
        return Err(Error::Degenerate(format!(
            "{distinct} distinct samples cannot support {n_boundaries} boundaries"
        )));
    }

    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(n_boundaries);
    for i in 1..levels {
        // smallest k (1-based) with k / n >= i / levels
        let k = (i * n).div_ceil(levels);
        let mut idx = k - 1;
        if let Some(&prev) = out.last() {
            if sorted[idx] <= prev {
                idx = sorted.partition_point(|&v| v <= prev);
            }
        }
        let b = *sorted.get(idx).ok_or_else(|| {
            Error::Degenerate("ran out of distinct values while placing boundaries".into())
        })?;
        out.push(b);
    }
    Ok(out)
}

/// Design bins from several sample batches (e.g. transformed entries of many
/// simulated maps) by pooling them into one empirical CDF.
pub fn design_bins_pooled<'a, I>(batches: I, bits: u32) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let pooled: Vec<f64> = batches.into_iter().flatten().copied().collect();
    design_bins(&pooled, bits)
}
