use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::fft::magnitude_fft;
use crate::dsp::mel::MelFilterbank;
use crate::dsp::window::hamming_window;
use crate::error::{Error, Result};

pub const RAW_FFT_SIZE: usize = 1024;
pub const FB_BANDS: usize = 40;
pub const FB_LOG_EPS: f64 = 1e-10;

/// Raw network inputs computed from the 20 ms region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RawKind {
    /// 513-bin magnitude spectrum.
    #[serde(rename = "fft1024")]
    Fft1024,
    /// Log energies of 40 mel filters.
    #[serde(rename = "fb40")]
    Fb40,
}

impl RawKind {
    pub const ALL: [RawKind; 2] = [RawKind::Fft1024, RawKind::Fb40];

    pub fn dims(self) -> usize {
        match self {
            RawKind::Fft1024 => RAW_FFT_SIZE / 2 + 1,
            RawKind::Fb40 => FB_BANDS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RawKind::Fft1024 => "fft1024",
            RawKind::Fb40 => "fb40",
        }
    }
}

impl fmt::Display for RawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RawKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown raw input {s:?}")))
    }
}

/// Builds raw inputs; holds the 40-band filterbank.
#[derive(Debug, Clone)]
pub struct RawInputBuilder {
    sample_rate: u32,
    filterbank: MelFilterbank,
}

impl RawInputBuilder {
    pub fn new(sample_rate: u32) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        Ok(Self {
            sample_rate,
            filterbank: MelFilterbank::new(FB_BANDS, RAW_FFT_SIZE, sample_rate, 0.0, nyquist)?,
        })
    }

    pub fn build(&self, region: &[f64], kind: RawKind) -> Result<Vec<f64>> {
        let window = hamming_window(region.len())?;
        let frame: Vec<f64> = region.iter().zip(&window).map(|(x, w)| x * w).collect();
        let mag = magnitude_fft(&frame, RAW_FFT_SIZE, self.sample_rate)?.magnitudes;
        match kind {
            RawKind::Fft1024 => Ok(mag),
            RawKind::Fb40 => Ok(self
                .filterbank
                .apply(&mag)?
                .into_iter()
                .map(|e| (e + FB_LOG_EPS).ln())
                .collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_tone_peak() {
        let b = RawInputBuilder::new(16_000).unwrap();
        let tone: Vec<f64> = (0..320)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin())
            .collect();
        let fft = b.build(&tone, RawKind::Fft1024).unwrap();
        assert_eq!(fft.len(), 513);
        let peak = (0..fft.len())
            .max_by(|&a, &c| fft[a].total_cmp(&fft[c]))
            .unwrap();
        assert_eq!(peak, 64);
        let fb = b.build(&tone, RawKind::Fb40).unwrap();
        assert_eq!(fb.len(), 40);
        assert!(fb.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fb40_tone_peaks_in_nearest_filter() {
        let b = RawInputBuilder::new(16_000).unwrap();
        let tone: Vec<f64> = (0..320)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin())
            .collect();
        let fb = b.build(&tone, RawKind::Fb40).unwrap();
        let peak = (0..fb.len())
            .max_by(|&a, &c| fb[a].total_cmp(&fb[c]))
            .unwrap();
        let centers = b.filterbank.centers();
        let nearest = (0..centers.len())
            .min_by(|&a, &c| {
                (centers[a] - 1000.0)
                    .abs()
                    .total_cmp(&(centers[c] - 1000.0).abs())
            })
            .unwrap();
        assert_eq!(peak, nearest);
    }

    #[test]
    fn silence_hits_log_floor() {
        let b = RawInputBuilder::new(16_000).unwrap();
        let fb = b.build(&[0.0; 320], RawKind::Fb40).unwrap();
        assert!(fb.iter().all(|v| (v - FB_LOG_EPS.ln()).abs() < 1e-9));
    }
}
