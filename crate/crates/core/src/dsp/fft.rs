use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One-sided magnitude spectrum, bins `0..=n_fft/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub n_fft: usize,
    pub sample_rate: u32,
}

impl Spectrum {
    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate) / self.n_fft as f64
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz()
    }

    /// Index of the bin closest to `freq`, clamped to the spectrum.
    pub fn nearest_bin(&self, freq: f64) -> usize {
        ((freq / self.bin_hz()).round().max(0.0) as usize).min(self.magnitudes.len() - 1)
    }

    pub fn at(&self, freq: f64) -> f64 {
        self.magnitudes[self.nearest_bin(freq)]
    }
}

/// In-place iterative radix-2 FFT. `buf.len()` must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // recomputed per butterfly rather than accumulated, keeps round-off flat in k
                let tw = Complex64::from_polar(1.0, step * k as f64);
                let a = buf[start + k];
                let b = buf[start + k + half] * tw;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Zero-pads `frame` to `n_fft` and returns the one-sided DFT.
pub fn rfft(frame: &[f64], n_fft: usize) -> Result<Vec<Complex64>> {
    if !n_fft.is_power_of_two() {
        return Err(Error::invalid(format!(
            "n_fft {n_fft} is not a power of two"
        )));
    }
    if frame.len() > n_fft {
        return Err(Error::invalid(format!(
            "frame of {} samples exceeds n_fft {n_fft}",
            frame.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for (b, &x) in buf.iter_mut().zip(frame) {
        b.re = x;
    }
    fft_in_place(&mut buf);
    buf.truncate(n_fft / 2 + 1);
    Ok(buf)
}

pub fn magnitude_fft(frame: &[f64], n_fft: usize, sample_rate: u32) -> Result<Spectrum> {
    let bins = rfft(frame, n_fft)?;
    Ok(Spectrum {
        magnitudes: bins.iter().map(|c| c.norm()).collect(),
        n_fft,
        sample_rate,
    })
}
