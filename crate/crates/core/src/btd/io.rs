//! Factor files: `manifest.json` (`{R, L, I, J, K}`) next to one QMAP blob
//! per matrix (`A_<r>.qmap`, `B_<r>.qmap`, `C.qmap`), each stored as a
//! `rows × cols × 1` tensor.

use std::path::Path;

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::BtdFactors;
use crate::error::{Error, Result};
use crate::simkit::{read_qmap, write_qmap};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorManifest {
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

fn write_matrix(path: &Path, m: ndarray::ArrayView2<'_, f64>) -> Result<()> {
    write_qmap(path, &m.to_owned().insert_axis(Axis(2)))
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let t = read_qmap(path)?;
    if t.dim() != (rows, cols, 1) {
        return Err(Error::Format(format!(
            "{} holds {:?}, expected ({rows}, {cols}, 1)",
            path.display(),
            t.dim()
        )));
    }
    Ok(t.index_axis_move(Axis(2), 0))
}

pub fn save_factors(dir: impl AsRef<Path>, f: &BtdFactors) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let d = f.dims();
    let manifest = FactorManifest {
        r: d.r,
        l: d.l,
        i: d.i,
        j: d.j,
        k: d.k,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    for r in 0..d.r {
        write_matrix(&dir.join(format!("A_{r}.qmap")), f.a_r(r))?;
        write_matrix(&dir.join(format!("B_{r}.qmap")), f.b_r(r))?;
    }
    write_matrix(&dir.join("C.qmap"), f.c().view())
}

pub fn load_factors(dir: impl AsRef<Path>) -> Result<BtdFactors> {
    let dir = dir.as_ref();
    let m: FactorManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let mut a = Array3::zeros((m.r, m.i, m.l));
    let mut b = Array3::zeros((m.r, m.j, m.l));
    for r in 0..m.r {
        a.index_axis_mut(Axis(0), r)
            .assign(&read_matrix(&dir.join(format!("A_{r}.qmap")), m.i, m.l)?);
        b.index_axis_mut(Axis(0), r)
            .assign(&read_matrix(&dir.join(format!("B_{r}.qmap")), m.j, m.l)?);
    }
    let c = read_matrix(&dir.join("C.qmap"), m.k, m.r)?;
    BtdFactors::new(a, b, c)
}
