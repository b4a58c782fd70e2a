use crate::error::{Error, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale.
///
/// Weights are the triangles evaluated at the FFT bin centre frequencies, so
/// every weight lies in `[0, 1]` and neighbouring filters share edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_filters: usize,
    pub n_fft: usize,
    pub sample_rate: u32,
    /// `(lower, centre, upper)` edge frequencies in Hz, one triple per filter.
    pub edges: Vec<(f64, f64, f64)>,
    /// `n_filters` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(
        n_filters: usize,
        n_fft: usize,
        sample_rate: u32,
        f_lo: f64,
        f_hi: f64,
    ) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_filters == 0 {
            return Err(Error::invalid("filterbank needs at least one filter"));
        }
        if !(0.0..f_hi).contains(&f_lo) || f_hi > nyquist {
            return Err(Error::invalid(format!(
                "need 0 <= f_lo < f_hi <= {nyquist}, got {f_lo}..{f_hi}"
            )));
        }
        let (m_lo, m_hi) = (hz_to_mel(f_lo), hz_to_mel(f_hi));
        let points: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = f64::from(sample_rate) / n_fft as f64;

        let mut edges = Vec::with_capacity(n_filters);
        let mut weights = Vec::with_capacity(n_filters);
        for m in 0..n_filters {
            let (lo, c, hi) = (points[m], points[m + 1], points[m + 2]);
            let row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f >= lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f <= hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    }
                })
                .collect();
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::invalid(format!(
                    "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; too many filters for n_fft {n_fft}"
                )));
            }
            edges.push((lo, c, hi));
            weights.push(row);
        }
        Ok(Self {
            n_filters,
            n_fft,
            sample_rate,
            edges,
            weights,
        })
    }

    /// Weighted sums of a one-sided spectrum (magnitudes or powers).
    pub fn apply(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        let n_bins = self.n_fft / 2 + 1;
        if spectrum.len() != n_bins {
            return Err(Error::Dimension {
                expected: n_bins,
                actual: spectrum.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .map(|row| row.iter().zip(spectrum).map(|(w, s)| w * s).sum())
            .collect())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.1).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_anchor_points() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(1000.0) - 999.985_6).abs() < 1e-3);
        for f in [0.0, 50.0, 700.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn forty_filter_bank_shape() {
        let fb = MelFilterbank::new(40, 1024, 16_000, 0.0, 8000.0).unwrap();
        assert_eq!(fb.weights.len(), 40);
        assert!(fb.weights.iter().all(|r| r.len() == 513));
        for pair in fb.edges.windows(2) {
            assert!(pair[0].1 < pair[1].1);
            // neighbouring triangles share edges
            assert_eq!(pair[0].1, pair[1].0);
            assert_eq!(pair[0].2, pair[1].1);
        }
        for row in &fb.weights {
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            assert!(row.iter().sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn first_center_matches_independent_computation() {
        // mel(8000) = 2595*log10(1 + 8000/700) = 2840.023046...; first centre at 1/41 of that
        let fb = MelFilterbank::new(40, 1024, 16_000, 0.0, 8000.0).unwrap();
        let expected = 700.0 * (10f64.powf(2_840.023_046_708 / 41.0 / 2595.0) - 1.0);
        assert!((fb.edges[0].1 - expected).abs() < 1e-4, "{}", fb.edges[0].1);
        assert!((fb.edges[0].1 - 44.374_077).abs() < 1e-5);
    }

    #[test]
    fn too_many_filters_is_an_error() {
        assert!(MelFilterbank::new(200, 256, 16_000, 0.0, 8000.0).is_err());
    }

    #[test]
    fn bad_band_rejected() {
        assert!(MelFilterbank::new(10, 512, 16_000, 500.0, 100.0).is_err());
        assert!(MelFilterbank::new(10, 512, 16_000, 0.0, 9000.0).is_err());
    }
}
