use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor on the per-dimension standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of each column.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("cannot fit a standardizer on no rows"))?;
        let dims = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dims];
        for r in rows {
            if r.len() != dims {
                return Err(Error::Dimension {
                    expected: dims,
                    actual: r.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dims];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.std[1], STD_FLOOR);
        assert_eq!(s.transform(&[2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert!(s.transform(&[1.0]).is_err());
    }

    #[test]
    fn two_point_column() {
        let s = Standardizer::fit(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
        assert_eq!(s.transform(&[4.0]).unwrap(), vec![3.0]);
    }

    proptest! {
        #[test]
        fn fitted_columns_are_standard(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..40)) {
            let s = Standardizer::fit(&rows).unwrap();
            let z = s.transform_all(&rows).unwrap();
            for d in 0..3 {
                let n = z.len() as f64;
                let mean = z.iter().map(|r| r[d]).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-6);
                if s.std[d] > 1e-6 {
                    let var = z.iter().map(|r| r[d] * r[d]).sum::<f64>() / n;
                    prop_assert!((var - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
