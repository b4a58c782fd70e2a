use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bandwidth above which a root is not considered a formant.
pub const MAX_FORMANT_BANDWIDTH_HZ: f64 = 700.0;
/// Roots this close to DC or Nyquist are ignored.
const EDGE_GUARD_HZ: f64 = 50.0;

/// All-pole model `1 / A(z)`, `A(z) = 1 + Σ a_k z^-k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcModel {
    pub order: usize,
    /// `a_1..a_order`.
    pub coefficients: Vec<f64>,
    /// Square root of the final prediction error.
    pub gain: f64,
}

impl LpcModel {
    /// Roots of `A(z)`, i.e. the poles of the synthesis filter.
    pub fn poles(&self) -> Vec<Complex64> {
        let p = self.order;
        let mut companion = DMatrix::<f64>::zeros(p, p);
        for (j, &a) in self.coefficients.iter().enumerate() {
            companion[(0, j)] = -a;
        }
        for i in 1..p {
            companion[(i, i - 1)] = 1.0;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|z| z.norm() < 1.0)
    }
}

pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            frame
                .iter()
                .zip(frame.iter().skip(k))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Autocorrelation-method LPC solved by Levinson-Durbin.
pub fn lpc(frame: &[f64], order: usize) -> Result<LpcModel> {
    if order < 2 {
        return Err(Error::invalid("lpc order must be at least 2"));
    }
    if frame.len() <= 2 * order {
        return Err(Error::invalid(format!(
            "lpc order {order} needs more than {} samples, got {}",
            2 * order,
            frame.len()
        )));
    }
    let r = autocorrelation(frame, order);
    if r[0] <= 0.0 || !r[0].is_finite() {
        return Err(Error::Numeric("lpc on a zero-energy frame".into()));
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 || !err.is_finite() {
            return Err(Error::Numeric(format!(
                "levinson recursion lost positivity at step {i}"
            )));
        }
    }
    Ok(LpcModel {
        order,
        coefficients: a[1..].to_vec(),
        gain: err.sqrt(),
    })
}

/// The lowest `n` formant frequencies: upper-half-plane poles with
/// bandwidth under 700 Hz, in ascending frequency.
pub fn formants(model: &LpcModel, sample_rate: u32, n: usize) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let mut freqs: Vec<f64> = model
        .poles()
        .into_iter()
        .filter(|z| z.im > 0.0)
        .filter_map(|z| {
            let freq = z.arg() * sr / (2.0 * PI);
            let bandwidth = -z.norm().ln() * sr / PI;
            (bandwidth < MAX_FORMANT_BANDWIDTH_HZ
                && freq > EDGE_GUARD_HZ
                && freq < sr / 2.0 - EDGE_GUARD_HZ)
                .then_some(freq)
        })
        .collect();
    freqs.sort_by(f64::total_cmp);
    freqs.truncate(n);
    freqs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::window::hamming_window;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Pulse train at 120 Hz through two resonators.
    fn two_resonator_vowel(f1: f64, f2: f64, n: usize) -> Vec<f64> {
        let sr = 16_000.0;
        let mut x: Vec<f64> = (0..n)
            .map(|i| if i % 133 == 0 { 1.0 } else { 0.0 })
            .collect();
        for (f, bw) in [(f1, 80.0), (f2, 100.0)] {
            let r = (-PI * bw / sr).exp();
            let c = 2.0 * r * (2.0 * PI * f / sr).cos();
            let (mut y1, mut y2) = (0.0, 0.0);
            for v in x.iter_mut() {
                let y = *v + c * y1 - r * r * y2;
                y2 = y1;
                y1 = y;
                *v = y;
            }
        }
        x
    }

    fn windowed(x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(hamming_window(x.len()).unwrap())
            .map(|(a, w)| a * w)
            .collect()
    }

    #[test]
    fn recovers_two_resonators() {
        let x = two_resonator_vowel(700.0, 1200.0, 2000);
        let frame = windowed(&x[1000..1512]);
        let model = lpc(&frame, 8).unwrap();
        assert!(model.is_stable());
        let f = formants(&model, 16_000, 2);
        assert_eq!(f.len(), 2);
        assert!((f[0] / 700.0 - 1.0).abs() < 0.05, "{f:?}");
        assert!((f[1] / 1200.0 - 1.0).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn white_noise_is_nearly_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..8000).map(|_| d.sample(&mut rng)).collect();
        let model = lpc(&x, 12).unwrap();
        assert!(
            model.coefficients.iter().all(|a| a.abs() < 0.05),
            "{:?}",
            model.coefficients
        );
    }

    #[test]
    fn pure_tone_lowest_formant() {
        let x: Vec<f64> = (0..640)
            .map(|i| (2.0 * PI * 500.0 * i as f64 / 16_000.0).sin())
            .collect();
        let model = lpc(&windowed(&x), 4).unwrap();
        let f = formants(&model, 16_000, 1);
        assert!((f[0] - 500.0).abs() < 25.0, "{f:?}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(lpc(&[0.0; 100], 10), Err(Error::Numeric(_))));
        assert!(lpc(&[1.0; 10], 10).is_err());
        assert!(lpc(&[1.0; 100], 1).is_err());
    }

    #[test]
    fn levinson_solves_normal_equations() {
        let x = two_resonator_vowel(500.0, 1500.0, 800);
        let frame = windowed(&x);
        let p = 6;
        let model = lpc(&frame, p).unwrap();
        let r = autocorrelation(&frame, p);
        // Σ_j a_j r(|i-j|) = -r(i)
        for i in 1..=p {
            let lhs: f64 = (1..=p)
                .map(|j| model.coefficients[j - 1] * r[i.abs_diff(j)])
                .sum();
            assert!((lhs + r[i]).abs() < 1e-8 * r[0]);
        }
    }
}
