//! `h(x) = log(x + a)` and its inverse.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::simkit::RadioMap;

/// Offset `a` used unless configured otherwise.
pub const DEFAULT_OFFSET: f64 = 1e-6;

pub fn log_transform(x: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!("offset a must be positive, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::invalid(format!(
            "log transform needs nonnegative input, got {x}"
        )));
    }
    Ok((x + a).ln())
}

pub fn inverse_log_transform(m: f64, a: f64) -> f64 {
    m.exp() - a
}

/// Entrywise `h` over a whole map.
pub fn log_transform_map(map: &RadioMap, a: f64) -> Result<Array3<f64>> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!("offset a must be positive, got {a}")));
    }
    // RadioMap entries are nonnegative by construction.
    Ok(map.tensor().mapv(|x| (x + a).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_maps_to_log_a() {
        let v = log_transform(0.0, DEFAULT_OFFSET).unwrap();
        assert!((v - (-6.0 * std::f64::consts::LN_10)).abs() < 1e-12);
        assert!((v + 13.815_510_557_964_274).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_input_and_offset() {
        assert!(log_transform(-1e-9, 1e-6).is_err());
        assert!(log_transform(f64::NAN, 1e-6).is_err());
        assert!(log_transform(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trips(x in 1e-9f64..1e4, a in 1e-8f64..1.0) {
            let back = inverse_log_transform(log_transform(x, a).unwrap(), a);
            // relative to x + a, the quantity the log actually sees
            prop_assert!((back - x).abs() <= 1e-12 * (x + a) * 4.0);
        }
    }

    #[test]
    fn inverse_round_trips_at_moderate_scale() {
        for &x in &[1e-3, 0.5, 1.0, 3.0, 250.0] {
            let back = inverse_log_transform(log_transform(x, DEFAULT_OFFSET).unwrap(), DEFAULT_OFFSET);
            assert!((back - x).abs() <= 1e-12 * x, "x = {x}");
        }
    }
}
