use serde::{Deserialize, Serialize};

use super::butterworth::{butterworth_bandpass, BandpassSpec, SosFilter};
use crate::error::{Error, Result};

/// Samples of preceding audio run through the band filters before a region.
pub const FILTER_CONTEXT: usize = 512;

/// 0–400 Hz, stop edge 25 % above the passband.
pub fn default_low_band() -> BandpassSpec {
    BandpassSpec::lowpass(400.0, 500.0)
}

/// 2000–7000 Hz. The lower stop edge sits 25 % below the passband; the upper
/// one would be 8750 Hz, past Nyquist at 16 kHz, so it is pulled in to 7600 Hz.
pub fn default_high_band() -> BandpassSpec {
    BandpassSpec::bandpass(2000.0, 7000.0, 1500.0, 7600.0)
}

pub fn rms(signal: &[f64]) -> Result<f64> {
    Ok(mean_square(signal)?.sqrt())
}

pub fn mean_square(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::invalid("energy of an empty signal"));
    }
    Ok(signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    /// 0–400 Hz (E1)
    Low,
    /// 2000–7000 Hz (E2)
    High,
}

/// The two designed band filters used for E1/E2.
#[derive(Debug, Clone)]
pub struct BandEnergy {
    low: SosFilter,
    high: SosFilter,
}

impl BandEnergy {
    pub fn new(low: &BandpassSpec, high: &BandpassSpec, sample_rate: f64) -> Result<Self> {
        Ok(Self {
            low: butterworth_bandpass(low, sample_rate)?,
            high: butterworth_bandpass(high, sample_rate)?,
        })
    }

    pub fn with_defaults(sample_rate: f64) -> Result<Self> {
        Self::new(&default_low_band(), &default_high_band(), sample_rate)
    }

    pub fn filter(&self, band: Band) -> &SosFilter {
        match band {
            Band::Low => &self.low,
            Band::High => &self.high,
        }
    }

    /// Mean square of `signal` after band filtering; `context` is the audio
    /// immediately preceding it (may be empty) and only warms up the filter.
    pub fn band_energy(&self, signal: &[f64], context: &[f64], band: Band) -> Result<f64> {
        if signal.is_empty() {
            return Err(Error::invalid("energy of an empty signal"));
        }
        mean_square(&self.filter(band).apply_with_context(context, signal))
    }
}
