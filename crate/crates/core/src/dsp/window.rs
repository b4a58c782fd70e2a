use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Symmetric Hamming window, `0.54 - 0.46 cos(2πk/(n-1))`. A length-1 window is `[1.0]`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::invalid("window length must be at least 1")),
        1 => Ok(vec![1.0]),
        _ => {
            let denom = (n - 1) as f64;
            Ok((0..n)
                .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / denom).cos())
                .collect())
        }
    }
}
