//! Ground-truth radio map synthesis.
//!
//! A radio map is the sum over emitters of a spatial loss field (SLF) times a
//! power spectral density (PSD): `X(i,j,k) = Σ_r S_r(i,j) · c_r(k)`.
//! SLFs come from a log-distance pathloss term plus correlated log-normal
//! shadowing ([`gen_slf`]); PSDs are sums of raised-cosine subband bumps
//! ([`gen_psd`]).

mod mapio;
mod psd;
mod sampling;
mod scenario;
mod shadow;

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};

pub use mapio::{read_qmap, read_qmap_bytes, write_qmap, write_qmap_bytes, QMAP_MAGIC};
pub use psd::{gen_psd, raised_cosine_psd, PsdConfig};
pub use sampling::{sample_fibers, ReplacementMode, SampleSet};
pub use scenario::{EmitterSpec, GeneratorKind, GroundTruth, Scenario};
pub use shadow::{gen_btd_slf, gen_shadow_field, gen_slf, ShadowingParams};

/// Spatial loss field of one emitter: nonnegative `I × J` linear power gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Slf {
    grid: Array2<f64>,
}

impl Slf {
    pub fn new(grid: Array2<f64>) -> Result<Self> {
        if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("SLF entries must be finite and nonnegative"));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    pub fn into_grid(self) -> Array2<f64> {
        self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dim()
    }

    pub fn frobenius(&self) -> f64 {
        self.grid.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Errors when `‖S‖_F > beta`.
    pub fn check_bound(&self, beta: f64) -> Result<()> {
        let f = self.frobenius();
        if f > beta {
            return Err(Error::invalid(format!(
                "SLF Frobenius norm {f:.4} exceeds beta = {beta}"
            )));
        }
        Ok(())
    }
}

/// Power spectral density of one emitter over `K` subbands.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    values: Array1<f64>,
}

impl Psd {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("PSD entries must be finite and nonnegative"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Nonnegative `I × J × K` power tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    tensor: Array3<f64>,
}

impl RadioMap {
    pub fn new(tensor: Array3<f64>) -> Result<Self> {
        if tensor.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "radio map entries must be finite and nonnegative",
            ));
        }
        Ok(Self { tensor })
    }

    pub fn tensor(&self) -> &Array3<f64> {
        &self.tensor
    }

    pub fn into_tensor(self) -> Array3<f64> {
        self.tensor
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.tensor.dim()
    }

    /// `‖X‖_∞`, the smallest valid `α` for this map.
    pub fn max_entry(&self) -> f64 {
        self.tensor.iter().copied().fold(0.0, f64::max)
    }

    /// Spectrum observed by a sensor at `(i, j)`.
    pub fn fiber(&self, i: usize, j: usize) -> Vec<f64> {
        self.tensor.slice(ndarray::s![i, j, ..]).to_vec()
    }
}

/// `X(i,j,k) = Σ_r S_r(i,j) · c_r(k)`.
pub fn compose(slfs: &[Slf], psds: &[Psd]) -> Result<RadioMap> {
    if slfs.is_empty() {
        return Err(Error::invalid("compose needs at least one emitter"));
    }
    if slfs.len() != psds.len() {
        return Err(Error::dims(format!(
            "{} SLFs but {} PSDs",
            slfs.len(),
            psds.len()
        )));
    }
    let (ni, nj) = slfs[0].dims();
    let nk = psds[0].len();
    if slfs.iter().any(|s| s.dims() != (ni, nj)) {
        return Err(Error::dims("SLFs have inconsistent grid sizes"));
    }
    if psds.iter().any(|p| p.len() != nk) {
        return Err(Error::dims("PSDs have inconsistent lengths"));
    }

    let mut data = vec![0.0; ni * nj * nk];
    crate::par::for_each_chunk_mut(&mut data, nk, |cell, fiber| {
        let (i, j) = (cell / nj, cell % nj);
        for (slf, psd) in slfs.iter().zip(psds) {
            let s = slf.grid[[i, j]];
            for (x, c) in fiber.iter_mut().zip(psd.values.iter()) {
                *x += s * c;
            }
        }
    });
    let tensor = Array3::from_shape_vec((ni, nj, nk), data).expect("shape matches buffer");
    Ok(RadioMap { tensor })
}
