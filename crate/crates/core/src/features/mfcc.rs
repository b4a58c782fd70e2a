use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{LandmarkRegion, PhoneSegment, Waveform};
use crate::dsp::mel::MelFilterbank;
use crate::dsp::mfcc::{mfcc_frames, with_dynamics, MfccConfig};
use crate::error::{Error, Result};

/// MFCC baseline variants: 13 or 39 dims, over the whole phone or the 20 ms region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MfccVariant {
    #[serde(rename = "mc13_whole")]
    Mc13Whole,
    #[serde(rename = "mc13_region")]
    Mc13Region,
    #[serde(rename = "mc39_whole")]
    Mc39Whole,
    #[serde(rename = "mc39_region")]
    Mc39Region,
}

impl MfccVariant {
    pub const ALL: [MfccVariant; 4] = [
        MfccVariant::Mc13Whole,
        MfccVariant::Mc13Region,
        MfccVariant::Mc39Whole,
        MfccVariant::Mc39Region,
    ];

    pub fn with_deltas(self) -> bool {
        matches!(self, MfccVariant::Mc39Whole | MfccVariant::Mc39Region)
    }

    pub fn whole_phone(self) -> bool {
        matches!(self, MfccVariant::Mc13Whole | MfccVariant::Mc39Whole)
    }

    pub fn dims(self) -> usize {
        if self.with_deltas() {
            39
        } else {
            13
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MfccVariant::Mc13Whole => "mc13_whole",
            MfccVariant::Mc13Region => "mc13_region",
            MfccVariant::Mc39Whole => "mc39_whole",
            MfccVariant::Mc39Region => "mc39_region",
        }
    }
}

impl fmt::Display for MfccVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MfccVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown MFCC variant {s:?}")))
    }
}

/// Frame-averaged MFCC vector.
///
/// Whole-phone variants analyse the landmark's source phone, region variants
/// the 20 ms region. Spans shorter than one frame are zero-padded to one frame.
pub fn mfcc_features(
    audio: &Waveform,
    segment: &PhoneSegment,
    region: &LandmarkRegion,
    variant: MfccVariant,
    config: &MfccConfig,
    filterbank: &MelFilterbank,
) -> Result<Vec<f64>> {
    let mut span = if variant.whole_phone() {
        let start = audio.time_to_index(segment.start);
        let end = audio.time_to_index(segment.end);
        audio.slice_padded(start, (end - start).max(0) as usize)
    } else {
        region.samples.clone()
    };
    let frame_len = config.frame_len(audio.sample_rate);
    if span.len() < frame_len {
        span.resize(frame_len, 0.0);
    }
    let statics = mfcc_frames(&span, audio.sample_rate, config, filterbank)?;
    let frames = if variant.with_deltas() {
        with_dynamics(&statics, config.delta_window)
    } else {
        statics
    };
    Ok(frame_mean(&frames))
}

fn frame_mean(frames: &[Vec<f64>]) -> Vec<f64> {
    let dims = frames.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dims];
    for f in frames {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let n = frames.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}
