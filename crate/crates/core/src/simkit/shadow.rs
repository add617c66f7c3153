//! Correlated log-normal shadowing and pathloss SLFs.
//!
//! The shadow field is a zero-mean Gaussian random field with covariance
//! `η² · exp(−d / Xc)`, realized as `η · L w` where `L` is the lower Cholesky
//! factor of the correlation matrix and `w` is white noise. Grids with more
//! than [`EXACT_MAX_POINTS`] cells use the separable surrogate
//! `exp(−|Δi| / Xc) · exp(−|Δj| / Xc)` and factor each axis on its own.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Slf;
use crate::error::{Error, Result};

/// Largest grid (64 × 64) factored with the exact 2-D correlation.
pub const EXACT_MAX_POINTS: usize = 64 * 64;

/// Distances below this many grid units are clamped before the pathloss log.
const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingParams {
    /// `Xc`, in grid units (meters at 1 m resolution).
    pub decorrelation_distance: f64,
    /// `η`, standard deviation of the shadowing in dB.
    pub shadowing_std: f64,
    /// `γ`.
    pub pathloss_exponent: f64,
    /// Emitter position `(i₀, j₀)`; may be fractional or off-grid.
    pub emitter: (f64, f64),
}

impl ShadowingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.decorrelation_distance > 0.0) {
            return Err(Error::invalid(format!(
                "decorrelation distance must be positive, got {}",
                self.decorrelation_distance
            )));
        }
        if !(self.shadowing_std >= 0.0) || !self.shadowing_std.is_finite() {
            return Err(Error::invalid("shadowing std must be finite and >= 0"));
        }
        if !(self.pathloss_exponent > 0.0) || !self.pathloss_exponent.is_finite() {
            return Err(Error::invalid("pathloss exponent must be positive"));
        }
        if !self.emitter.0.is_finite() || !self.emitter.1.is_finite() {
            return Err(Error::invalid("emitter location must be finite"));
        }
        Ok(())
    }
}

/// Packed lower-triangular factor; `rows[i]` holds `L[i][0..=i]`.
struct LowerFactor {
    rows: Vec<Vec<f64>>,
}

impl LowerFactor {
    /// Cholesky factorization of the SPD/PSD matrix `cov(p, q)` of size `n`.
    ///
    /// Pivots that collapse below `n · 1e-15` are treated as exact zeros so
    /// that nearly rank-deficient correlations (huge `Xc`) still factor.
    fn factor<F>(n: usize, cov: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let tol = n as f64 * 1e-15;
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i + 1]).collect();
        for j in 0..n {
            let (head, tail) = rows.split_at_mut(j + 1);
            let row_j = &mut head[j];
            let d = cov(j, j) - dot(&row_j[..j], &row_j[..j]);
            let pivot = if d > tol { d.sqrt() } else { 0.0 };
            row_j[j] = pivot;
            let row_j = &head[j];
            crate::par::for_each_mut(tail, |off, row_i| {
                let i = j + 1 + off;
                row_i[j] = if pivot > 0.0 {
                    (cov(i, j) - dot(&row_i[..j], &row_j[..j])) / pivot
                } else {
                    0.0
                };
            });
        }
        Self { rows }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        crate::par::map_slice(&self.rows, |row| dot(row, &w[..row.len()]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum FieldFactor {
    Exact(LowerFactor),
    Separable { rows: LowerFactor, cols: LowerFactor },
}

type CacheKey = (usize, usize, u64);

fn factor_cache() -> &'static Mutex<HashMap<CacheKey, Arc<FieldFactor>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<FieldFactor>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn field_factor(ni: usize, nj: usize, xc: f64) -> Arc<FieldFactor> {
    let key = (ni, nj, xc.to_bits());
    if let Some(f) = factor_cache().lock().unwrap().get(&key) {
        return Arc::clone(f);
    }
    // Factoring outside the lock; a concurrent duplicate computation is harmless.
    let factor = if ni * nj <= EXACT_MAX_POINTS {
        FieldFactor::Exact(LowerFactor::factor(ni * nj, |p, q| {
            let di = (p / nj) as f64 - (q / nj) as f64;
            let dj = (p % nj) as f64 - (q % nj) as f64;
            (-(di * di + dj * dj).sqrt() / xc).exp()
        }))
    } else {
        let axis = |n: usize| {
            LowerFactor::factor(n, |p, q| (-(p as f64 - q as f64).abs() / xc).exp())
        };
        FieldFactor::Separable {
            rows: axis(ni),
            cols: axis(nj),
        }
    };
    let factor = Arc::new(factor);
    factor_cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| Arc::clone(&factor));
    factor
}

/// White noise with one independent ChaCha stream per grid row.
fn white_noise(ni: usize, nj: usize, seed: u64) -> Vec<f64> {
    let mut w = vec![0.0; ni * nj];
    crate::par::for_each_chunk_mut(&mut w, nj, |row, chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(row as u64);
        for v in chunk.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    });
    w
}

/// Zero-mean shadowing field in dB with marginal std `η` and correlation
/// `exp(−d / Xc)`. Deterministic per seed, independent of thread count.
pub fn gen_shadow_field(
    ni: usize,
    nj: usize,
    params: &ShadowingParams,
    seed: u64,
) -> Result<Array2<f64>> {
    if ni == 0 || nj == 0 {
        return Err(Error::invalid("grid dimensions must be at least 1"));
    }
    params.validate()?;
    let eta = params.shadowing_std;
    if eta == 0.0 {
        return Ok(Array2::zeros((ni, nj)));
    }
    let w = white_noise(ni, nj, seed);
    let field = match &*field_factor(ni, nj, params.decorrelation_distance) {
        FieldFactor::Exact(l) => {
            debug_assert_eq!(l.len(), ni * nj);
            l.apply(&w)
        }
        FieldFactor::Separable { rows, cols } => {
            // L_I · W · L_Jᵀ
            let mut right = vec![0.0; ni * nj];
            crate::par::for_each_chunk_mut(&mut right, nj, |i, out| {
                let wi = &w[i * nj..(i + 1) * nj];
                for (j, o) in out.iter_mut().enumerate() {
                    *o = dot(&cols.rows[j], &wi[..=j]);
                }
            });
            let mut out = vec![0.0; ni * nj];
            crate::par::for_each_chunk_mut(&mut out, nj, |i, dst| {
                for (k, &lik) in rows.rows[i].iter().enumerate() {
                    let src = &right[k * nj..(k + 1) * nj];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += lik * s;
                    }
                }
            });
            out
        }
    };
    let field = Array2::from_shape_vec((ni, nj), field).expect("grid buffer");
    Ok(field * eta)
}

/// Pathloss plus shadowing SLF, normalized so its largest entry is exactly 1.
pub fn gen_slf(ni: usize, nj: usize, params: &ShadowingParams, seed: u64) -> Result<Slf> {
    let shadow = gen_shadow_field(ni, nj, params, seed)?;
    let (ei, ej) = params.emitter;
    let gamma = params.pathloss_exponent;
    let mut grid = Array2::from_shape_fn((ni, nj), |(i, j)| {
        let d = ((i as f64 - ei).powi(2) + (j as f64 - ej).powi(2))
            .sqrt()
            .max(MIN_DISTANCE);
        let db = -10.0 * gamma * d.log10() + shadow[[i, j]];
        10f64.powf(db / 10.0)
    });
    let peak = grid.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Numerical("SLF peak is not a positive finite value".into()));
    }
    grid.mapv_inplace(|v| v / peak);
    Slf::new(grid)
}

/// SLF with exact rank `L`: `A Bᵀ` for uniform `[0, 1)` factors, scaled to max 1.
///
/// Used for scenarios that lie exactly in the block-term model class.
pub fn gen_btd_slf(ni: usize, nj: usize, rank: usize, seed: u64) -> Result<Slf> {
    if ni == 0 || nj == 0 || rank == 0 {
        return Err(Error::invalid("BTD SLF needs positive I, J and L"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((ni, rank), |_| rng.random::<f64>());
    let b = Array2::from_shape_fn((nj, rank), |_| rng.random::<f64>());
    let mut s = a.dot(&b.t());
    let peak = s.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::Degenerate("random BTD factors produced a zero SLF".into()));
    }
    s.mapv_inplace(|v| v / peak);
    Slf::new(s)
}
