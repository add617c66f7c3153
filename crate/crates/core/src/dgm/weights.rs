//! Generator weight files.
//!
//! A JSON manifest describes the layer chain:
//!
//! ```json
//! {"format": "qsc-dense-generator", "format_version": 1, "D": 256, "I": 51, "J": 51,
//!  "layers": [{"rows": 512, "cols": 256, "activation": "relu", "has_bias": true}, …],
//!  "weights_file": "gen.bin"}
//! ```
//!
//! Tensors are little-endian `f32`, row-major, concatenated in manifest
//! order (each layer's weight, then its bias if present). They live either in
//! a sidecar file named by `weights_file` (relative to the manifest) or inline
//! as base64 under `weights_base64`.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::net::{Activation, DenseLayer, GeneratorNet};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "qsc-dense-generator";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightEncoding {
    /// Raw blob next to the manifest.
    Sidecar,
    /// Blob embedded in the manifest as base64.
    Base64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub has_bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub format: String,
    pub format_version: u32,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub layers: Vec<LayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_base64: Option<String>,
}

impl GeneratorManifest {
    fn value_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.rows * l.cols + if l.has_bias { l.rows } else { 0 })
            .sum()
    }
}

fn encode_blob(net: &GeneratorNet) -> Vec<u8> {
    let mut out = Vec::new();
    for layer in net.layers() {
        let values = layer.weight.iter().chain(layer.bias.iter().flatten());
        for &v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn manifest_for(net: &GeneratorNet) -> GeneratorManifest {
    let (i, j) = net.grid();
    GeneratorManifest {
        format: FORMAT_NAME.into(),
        format_version: FORMAT_VERSION,
        d: net.latent_dim(),
        i,
        j,
        layers: net
            .layers()
            .iter()
            .map(|l| LayerSpec {
                rows: l.rows(),
                cols: l.cols(),
                activation: l.activation,
                has_bias: l.bias.is_some(),
            })
            .collect(),
        weights_file: None,
        weights_base64: None,
    }
}

/// Write `net` to `manifest_path`; a sidecar blob goes next to it with the
/// extension `.bin`. Parameters are rounded to `f32`.
pub fn save_generator(net: &GeneratorNet, manifest_path: impl AsRef<Path>, encoding: WeightEncoding) -> Result<()> {
    let path = manifest_path.as_ref();
    let mut manifest = manifest_for(net);
    let blob = encode_blob(net);
    match encoding {
        WeightEncoding::Base64 => manifest.weights_base64 = Some(B64.encode(&blob)),
        WeightEncoding::Sidecar => {
            let sidecar = path.with_extension("bin");
            let name = sidecar
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::invalid("manifest path has no usable file name"))?
                .to_owned();
            std::fs::write(&sidecar, &blob)?;
            manifest.weights_file = Some(name);
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Build a generator from a manifest and its blob.
pub fn generator_from_parts(manifest: &GeneratorManifest, blob: &[u8]) -> Result<GeneratorNet> {
    if manifest.format != FORMAT_NAME {
        return Err(Error::Format(format!("unknown generator format {:?}", manifest.format)));
    }
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported generator format version {}",
            manifest.format_version
        )));
    }
    let expected = manifest.value_count() * 4;
    if blob.len() != expected {
        return Err(Error::Format(format!("weight blob has {} bytes, manifest needs {expected}", blob.len())));
    }
    if manifest.layers.first().map(|l| l.cols) != Some(manifest.d) {
        return Err(Error::Format("first layer width does not match D".into()));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let layers = manifest
        .layers
        .iter()
        .map(|spec| {
            let w = Array2::from_shape_vec((spec.rows, spec.cols), take(spec.rows * spec.cols))
                .expect("length checked");
            let b = spec.has_bias.then(|| Array1::from(take(spec.rows)));
            DenseLayer::new(w, b, spec.activation)
        })
        .collect::<Result<Vec<_>>>()?;
    GeneratorNet::new(layers, manifest.i, manifest.j)
}

/// Read a generator; a sidecar blob is resolved relative to the manifest.
pub fn load_generator(manifest_path: impl AsRef<Path>) -> Result<GeneratorNet> {
    let path = manifest_path.as_ref();
    let manifest: GeneratorManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let blob = match (&manifest.weights_file, &manifest.weights_base64) {
        (Some(file), None) => {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            std::fs::read(dir.join(file))?
        }
        (None, Some(data)) => B64
            .decode(data)
            .map_err(|e| Error::Format(format!("bad base64 weights: {e}")))?,
        _ => {
            return Err(Error::Format(
                "manifest must name exactly one of weights_file and weights_base64".into(),
            ))
        }
    };
    generator_from_parts(&manifest, &blob)
}
