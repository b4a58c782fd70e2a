use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fft::rfft;
use super::mel::MelFilterbank;
use super::window::hamming_window;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub n_ceps: usize,
    /// Append delta and delta-delta blocks (13 -> 39 dims).
    pub include_deltas: bool,
    pub pre_emphasis: f64,
    pub frame_len_s: f64,
    pub frame_hop_s: f64,
    pub delta_window: usize,
    pub n_fft: usize,
    pub n_filters: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    /// Floor applied to filterbank energies before the log.
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_ceps: 13,
            include_deltas: false,
            pre_emphasis: 0.97,
            frame_len_s: 0.010,
            frame_hop_s: 0.005,
            delta_window: 2,
            n_fft: 512,
            n_filters: 26,
            f_lo: 0.0,
            f_hi: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ceps == 0 || self.n_ceps > self.n_filters {
            return Err(Error::invalid(format!(
                "n_ceps {} must be in 1..={}",
                self.n_ceps, self.n_filters
            )));
        }
        if self.delta_window == 0 {
            return Err(Error::invalid("delta window must be >= 1"));
        }
        if self.frame_len_s <= 0.0 || self.frame_hop_s <= 0.0 {
            return Err(Error::invalid("frame length and hop must be positive"));
        }
        if self.log_floor <= 0.0 {
            return Err(Error::invalid("log floor must be positive"));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_len_s * f64::from(sample_rate)).round() as usize
    }

    pub fn frame_hop(&self, sample_rate: u32) -> usize {
        (self.frame_hop_s * f64::from(sample_rate)).round() as usize
    }

    pub fn filterbank(&self, sample_rate: u32) -> Result<MelFilterbank> {
        MelFilterbank::new(
            self.n_filters,
            self.n_fft,
            sample_rate,
            self.f_lo,
            self.f_hi,
        )
    }

    pub fn dims(&self) -> usize {
        if self.include_deltas {
            3 * self.n_ceps
        } else {
            self.n_ceps
        }
    }
}

/// Orthonormal DCT-II, keeping the first `n_out` coefficients.
pub fn dct2_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Static cepstra per frame: pre-emphasis, Hamming, power spectrum,
/// mel energies, log, DCT-II. Returns `n_ceps` coefficients (C0 included)
/// for each full frame; `include_deltas` is ignored here (see [`with_dynamics`]).
pub fn mfcc_frames(
    signal: &[f64],
    sample_rate: u32,
    config: &MfccConfig,
    filterbank: &MelFilterbank,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let frame_len = config.frame_len(sample_rate);
    let hop = config.frame_hop(sample_rate);
    if signal.len() < frame_len || frame_len == 0 {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than one {frame_len}-sample frame",
            signal.len()
        )));
    }
    if filterbank.n_fft != config.n_fft {
        return Err(Error::invalid("filterbank n_fft differs from config n_fft"));
    }
    // x[-1] is taken to equal x[0], so a constant input stays constant
    let emphasized: Vec<f64> = signal
        .iter()
        .enumerate()
        .map(|(i, &x)| x - config.pre_emphasis * signal[i.saturating_sub(1)])
        .collect();
    let window = hamming_window(frame_len)?;
    let n_frames = 1 + (signal.len() - frame_len) / hop;

    let mut out = Vec::with_capacity(n_frames);
    let mut frame = vec![0.0; frame_len];
    for f in 0..n_frames {
        let start = f * hop;
        for (i, v) in frame.iter_mut().enumerate() {
            *v = emphasized[start + i] * window[i];
        }
        let power: Vec<f64> = rfft(&frame, config.n_fft)?
            .iter()
            .map(|c| c.norm_sqr())
            .collect();
        let log_mel: Vec<f64> = filterbank
            .apply(&power)?
            .into_iter()
            .map(|e| e.max(config.log_floor).ln())
            .collect();
        out.push(dct2_ortho(&log_mel, config.n_ceps));
    }
    Ok(out)
}

/// Regression deltas with replicated edge frames:
/// `d_t = Σ n (c_{t+n} - c_{t-n}) / (2 Σ n²)`, n = 1..=N.
pub fn deltas(seq: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let len = seq.len();
    if len == 0 {
        return Vec::new();
    }
    let dim = seq[0].len();
    let denom = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    (0..len)
        .map(|t| {
            let mut d = vec![0.0; dim];
            for n in 1..=window {
                let ahead = &seq[(t + n).min(len - 1)];
                let behind = &seq[t.saturating_sub(n)];
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj += n as f64 * (ahead[j] - behind[j]);
                }
            }
            d.iter_mut().for_each(|v| *v /= denom);
            d
        })
        .collect()
}

/// Statics followed by deltas and delta-deltas per frame.
pub fn with_dynamics(statics: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let d1 = deltas(statics, window);
    let d2 = deltas(&d1, window);
    statics
        .iter()
        .zip(&d1)
        .zip(&d2)
        .map(|((s, a), b)| s.iter().chain(a).chain(b).copied().collect())
        .collect()
}
