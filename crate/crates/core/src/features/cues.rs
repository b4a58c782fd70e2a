use serde::{Deserialize, Serialize};

use crate::corpus::{
    LandmarkRegion, Manner, PhoneClassMap, PhoneSegment, Waveform, REGION_SAMPLES,
};
use crate::dsp::energy::{mean_square, Band, BandEnergy, FILTER_CONTEXT};
use crate::dsp::fft::magnitude_fft;
use crate::dsp::lpc::{formants, lpc};
use crate::dsp::pitch::{track_pitch, PitchConfig};
use crate::dsp::window::hamming_window;
use crate::error::Result;

pub const CUE_DIMS: usize = 8;
/// Denominator guard for the E1/E2 ratio.
pub const RATIO_EPS: f64 = 1e-12;

/// The eight landmark-region acoustic cues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueVector {
    pub rms: f64,
    pub e1: f64,
    pub e2: f64,
    pub e_ratio: f64,
    pub pncc: f64,
    pub h1: f64,
    pub vot: f64,
    /// F1 slope into the adjacent vowel, Hz/s.
    pub formant_transition: f64,
}

impl CueVector {
    pub fn to_array(&self) -> [f64; CUE_DIMS] {
        [
            self.rms,
            self.e1,
            self.e2,
            self.e_ratio,
            self.pncc,
            self.h1,
            self.vot,
            self.formant_transition,
        ]
    }

    pub fn names() -> [&'static str; CUE_DIMS] {
        [
            "rms",
            "e1",
            "e2",
            "e_ratio",
            "pncc",
            "h1",
            "vot",
            "formant_transition",
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueConfig {
    pub pitch: PitchConfig,
    pub fft_size: usize,
    pub lpc_order: usize,
    pub formant_frame_s: f64,
    pub formant_hop_s: f64,
    /// Length of the vowel stretch over which the F1 slope is fit.
    pub transition_span_s: f64,
    pub pre_emphasis: f64,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            pitch: PitchConfig::default(),
            fft_size: 1024,
            lpc_order: 12,
            formant_frame_s: 0.020,
            formant_hop_s: 0.005,
            transition_span_s: 0.040,
            pre_emphasis: 0.97,
        }
    }
}

/// Neighbouring phones a cue vector needs besides the region itself.
#[derive(Debug, Clone, Copy)]
pub struct CueContext<'a> {
    /// The phone the landmark belongs to.
    pub segment: &'a PhoneSegment,
    /// For a stop closure, the release that follows it (stop release or affricate).
    pub release: Option<&'a PhoneSegment>,
    pub adjacent_vowel: Option<&'a PhoneSegment>,
    /// Vowel follows the obstruent (true) or precedes it.
    pub vowel_follows: bool,
}

impl<'a> CueContext<'a> {
    /// Looks up the release and adjacent vowel of `segments[index]`.
    pub fn resolve(
        segments: &'a [PhoneSegment],
        index: usize,
        map: &PhoneClassMap,
    ) -> Result<Self> {
        let segment = &segments[index];
        let manner = |i: usize| map.lookup(&segments[i].label).map(|c| c.manner);
        let mut next = index + 1;
        let mut release = None;
        if manner(index)? == Manner::StopClosure
            && next < segments.len()
            && matches!(manner(next)?, Manner::StopRelease | Manner::Affricate)
            && segments[next].start == segment.end
        {
            release = Some(&segments[next]);
            next += 1;
        }
        // a closure's release belongs to the same consonant; skip it as well as
        // the closure in front of a release
        let mut adjacent_vowel = None;
        let mut vowel_follows = true;
        if next < segments.len() && manner(next)? == Manner::Vowel {
            adjacent_vowel = Some(&segments[next]);
        } else {
            let mut prev = index;
            if prev > 0
                && manner(index)? == Manner::StopRelease
                && manner(prev - 1)? == Manner::StopClosure
            {
                prev -= 1;
            }
            if prev > 0 && manner(prev - 1)? == Manner::Vowel {
                adjacent_vowel = Some(&segments[prev - 1]);
                vowel_follows = false;
            }
        }
        Ok(Self {
            segment,
            release,
            adjacent_vowel,
            vowel_follows,
        })
    }

    /// Release-segment duration for stops (closures borrow their release's),
    /// full duration for fricatives and affricates.
    pub fn vot(&self) -> f64 {
        self.release.unwrap_or(self.segment).duration()
    }
}

/// Computes [`CueVector`]s with pre-designed band filters.
#[derive(Debug, Clone)]
pub struct CueExtractor {
    pub config: CueConfig,
    bands: BandEnergy,
    sample_rate: u32,
}

impl CueExtractor {
    pub fn new(config: CueConfig, sample_rate: u32) -> Result<Self> {
        config.pitch.validate()?;
        Ok(Self {
            bands: BandEnergy::with_defaults(f64::from(sample_rate))?,
            config,
            sample_rate,
        })
    }

    pub fn manual_cues(
        &self,
        region: &LandmarkRegion,
        ctx: &CueContext<'_>,
        audio: &Waveform,
    ) -> Result<CueVector> {
        let x = &region.samples;
        let context =
            audio.slice_padded(region.start_sample - FILTER_CONTEXT as i64, FILTER_CONTEXT);
        let rms = mean_square(x)?.sqrt();
        let e1 = self.bands.band_energy(x, &context, Band::Low)?;
        let e2 = self.bands.band_energy(x, &context, Band::High)?;

        let (pncc, f0) = self.periodicity(region, audio)?;
        let h1 = match f0 {
            Some(f0) => {
                let w = hamming_window(x.len())?;
                let windowed: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
                magnitude_fft(&windowed, self.config.fft_size, self.sample_rate)?.at(f0)
            }
            None => 0.0,
        };

        Ok(CueVector {
            rms,
            e1,
            e2,
            e_ratio: e1 / (e2 + RATIO_EPS),
            pncc,
            h1,
            vot: ctx.vot(),
            formant_transition: ctx
                .adjacent_vowel
                .map(|v| self.f1_slope(v, ctx.vowel_follows, audio))
                .unwrap_or(0.0),
        })
    }

    /// Highest NCCF peak over frames centred inside the region, and the
    /// median F0 of its voiced frames (None when all are unvoiced).
    fn periodicity(&self, region: &LandmarkRegion, audio: &Waveform) -> Result<(f64, Option<f64>)> {
        let pc = &self.config.pitch;
        let window = pc.window_len(self.sample_rate);
        let span = pc.frame_span(self.sample_rate);
        let start = region.start_sample - (window / 2) as i64;
        let slice = audio.slice_padded(start, REGION_SAMPLES + span);
        let track = track_pitch(&slice, self.sample_rate, pc)?;
        let sr = f64::from(self.sample_rate);
        let region_len = REGION_SAMPLES as f64 / sr;
        let offset = (window / 2) as f64 / sr;
        let inside: Vec<_> = track
            .frames
            .iter()
            .filter(|f| f.time_s - offset >= -1e-9 && f.time_s - offset <= region_len + 1e-9)
            .collect();
        let pncc = inside.iter().map(|f| f.nccf_peak).fold(0.0f64, f64::max);
        let mut f0s: Vec<f64> = inside.iter().filter_map(|f| f.f0).collect();
        f0s.sort_by(f64::total_cmp);
        Ok((pncc, f0s.get(f0s.len() / 2).copied()))
    }

    /// Least-squares F1 slope (Hz/s) over the first (or last) stretch of the vowel.
    fn f1_slope(&self, vowel: &PhoneSegment, follows: bool, audio: &Waveform) -> f64 {
        let cfg = &self.config;
        let sr = f64::from(self.sample_rate);
        let frame = (cfg.formant_frame_s * sr).round() as usize;
        let hop = (cfg.formant_hop_s * sr).round() as usize;
        let span = ((cfg.transition_span_s.min(vowel.duration())) * sr).round() as usize;
        if span < frame || frame <= 2 * cfg.lpc_order {
            return 0.0;
        }
        let first = if follows {
            audio.time_to_index(vowel.start)
        } else {
            audio.time_to_index(vowel.end) - span as i64
        };
        let Ok(window) = hamming_window(frame) else {
            return 0.0;
        };
        let mut points = Vec::new();
        for k in 0..=(span - frame) / hop {
            let start = first + (k * hop) as i64;
            let raw = audio.slice_padded(start - 1, frame + 1);
            let emph: Vec<f64> = (0..frame)
                .map(|i| (raw[i + 1] - cfg.pre_emphasis * raw[i]) * window[i])
                .collect();
            if let Some(&f1) = lpc(&emph, cfg.lpc_order)
                .ok()
                .and_then(|m| formants(&m, self.sample_rate, 1).first().copied())
                .as_ref()
            {
                points.push((start as f64 / sr + 0.5 * frame as f64 / sr, f1));
            }
        }
        least_squares_slope(&points)
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}
