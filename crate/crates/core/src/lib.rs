//! Quantized spectrum cartography.
//!
//! The crate covers the whole pipeline from synthetic radio maps to recovered
//! ones:
//!
//! - [`simkit`] builds spatial loss fields, power spectra and composed
//!   `I × J × K` radio maps, and draws sensor locations.
//! - [`quant`] holds the log transform, quantile bin design, the dithered
//!   Gaussian quantizer and its likelihood kernel.
//! - [`btd`] and [`dgm`] recover a map from quantized fibers by regularized
//!   maximum likelihood under a block-term tensor model or a frozen dense
//!   generator, respectively.
//! - [`analysis`] provides the LNRE metric and the recoverability-bound
//!   calculators.
//!
//! With the default `parallel` feature, per-entry work (likelihood
//! evaluation, quantization, shadow-field synthesis) is spread over a rayon
//! pool. Reductions always happen in a fixed order, so results are identical
//! with and without the feature.

pub mod analysis;
pub mod btd;
pub mod dgm;
pub mod error;
mod likelihood;
pub mod optim;
pub mod par;
pub mod quant;
pub mod simkit;

pub use error::{Error, Result};
