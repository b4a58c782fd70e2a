use super::landmarks::{label_voicing, Landmark};
use super::phones::{Label, PhoneClassMap};
use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;
/// Region length in seconds.
pub const REGION_SECONDS: f64 = 0.020;
/// Region length in samples at 16 kHz.
pub const REGION_SAMPLES: usize = 320;

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn time_to_index(&self, t: f64) -> i64 {
        (t * f64::from(self.sample_rate)).round() as i64
    }

    /// Copies `[start, start + len)`, zero-filling whatever falls outside the signal.
    pub fn slice_padded(&self, start: i64, len: usize) -> Vec<f64> {
        let n = self.samples.len() as i64;
        (start..start + len as i64)
            .map(|i| {
                if (0..n).contains(&i) {
                    self.samples[i as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// The 20 ms slice of audio anchored at an obstruent landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkRegion {
    pub samples: Vec<f64>,
    pub landmark: Landmark,
    pub label: Label,
    /// `(start_s, end_s)`; may extend outside the utterance when padded.
    pub region_bounds: (f64, f64),
    /// First sample index of the region in the source audio (negative when padded at the head).
    pub start_sample: i64,
    pub padded: bool,
}

impl LandmarkRegion {
    pub fn utterance_id(&self) -> &str {
        self.landmark
            .source
            .as_ref()
            .map(|s| s.utterance_id.as_str())
            .unwrap_or("")
    }
}

/// Cuts one region per obstruent landmark.
///
/// Closure landmarks take the 20 ms after the landmark, release landmarks the
/// 20 ms before it. Nasal, vowel and glide landmarks are skipped. Regions
/// reaching past either end of the audio are zero-padded and flagged.
pub fn extract_regions(
    audio: &Waveform,
    landmarks: &[Landmark],
    map: &PhoneClassMap,
) -> Result<Vec<LandmarkRegion>> {
    if audio.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "regions need {SAMPLE_RATE} Hz audio, got {}",
            audio.sample_rate
        )));
    }
    let sr = f64::from(audio.sample_rate);
    let n = audio.len() as i64;
    let mut out = Vec::new();
    for lm in landmarks.iter().filter(|l| l.kind.is_obstruent()) {
        let source = lm.source.as_ref().ok_or_else(|| {
            Error::Structure(format!(
                "landmark {} at {:.4} has no source phone",
                lm.kind, lm.time
            ))
        })?;
        let label = label_voicing(source, map)?;
        let anchor = audio.time_to_index(lm.time);
        let start = if lm.kind.is_closure() {
            anchor
        } else {
            anchor - REGION_SAMPLES as i64
        };
        let end = start + REGION_SAMPLES as i64;
        out.push(LandmarkRegion {
            samples: audio.slice_padded(start, REGION_SAMPLES),
            landmark: lm.clone(),
            label,
            region_bounds: (start as f64 / sr, end as f64 / sr),
            start_sample: start,
            padded: start < 0 || end > n,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{derive_landmarks, LandmarkType, PhoneSegment};

    fn ramp(n: usize) -> Waveform {
        Waveform::new((0..n).map(|i| i as f64 + 1.0).collect(), SAMPLE_RATE)
    }

    fn lm(time: f64, kind: LandmarkType, label: &str, start: f64, end: f64) -> Landmark {
        Landmark {
            time,
            kind,
            source: Some(PhoneSegment::new(label, start, end, "u")),
        }
    }

    #[test]
    fn closure_region_follows_landmark() {
        let audio = ramp(16_000);
        let r = extract_regions(
            &audio,
            &[lm(0.1916, LandmarkType::Fc, "s", 0.1916, 0.2839)],
            &PhoneClassMap::english(),
        )
        .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].samples.len(), REGION_SAMPLES);
        let (s, e) = r[0].region_bounds;
        assert!((s - 0.1916).abs() < 1e-4 && (e - 0.2116).abs() < 1e-4);
        assert!((e - s - REGION_SECONDS).abs() < 1e-12);
        assert_eq!(r[0].samples[0], 3066.0 + 1.0);
        assert_eq!(r[0].label, Label::Unvoiced);
        assert!(!r[0].padded);
    }

    #[test]
    fn release_region_precedes_landmark() {
        let audio = ramp(16_000);
        let r = extract_regions(
            &audio,
            &[lm(0.2839, LandmarkType::Fr, "z", 0.1916, 0.2839)],
            &PhoneClassMap::english(),
        )
        .unwrap();
        let (s, e) = r[0].region_bounds;
        assert!((s - 0.2639).abs() < 1e-4 && (e - 0.2839).abs() < 1e-4);
        assert_eq!(r[0].label, Label::Voiced);
    }

    #[test]
    fn head_of_utterance_is_zero_padded() {
        let audio = ramp(16_000);
        let r = extract_regions(
            &audio,
            &[lm(0.005, LandmarkType::Sc, "tcl", 0.005, 0.05)],
            &PhoneClassMap::english(),
        )
        .unwrap();
        // closure regions start at the landmark, so nothing to pad here
        assert!(!r[0].padded);

        let r = extract_regions(
            &audio,
            &[lm(0.005, LandmarkType::Sr, "t", 0.005, 0.05)],
            &PhoneClassMap::english(),
        )
        .unwrap();
        let (s, e) = r[0].region_bounds;
        assert!((s + 0.015).abs() < 1e-12 && (e - 0.005).abs() < 1e-12);
        assert!(r[0].padded);
        assert!(r[0].samples[..240].iter().all(|&x| x == 0.0));
        assert_eq!(r[0].samples[240], 1.0);
        assert_eq!(r[0].start_sample, -240);
    }

    #[test]
    fn tail_of_utterance_is_zero_padded() {
        let audio = ramp(1000);
        let r = extract_regions(
            &audio,
            &[lm(0.05, LandmarkType::Fc, "f", 0.05, 0.0625)],
            &PhoneClassMap::english(),
        )
        .unwrap();
        assert!(r[0].padded);
        assert_eq!(r[0].samples.len(), REGION_SAMPLES);
        assert!(r[0].samples[200..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_obstruent_landmarks_are_skipped() {
        let audio = ramp(16_000);
        let segs = vec![
            PhoneSegment::new("m", 0.1, 0.2, "u"),
            PhoneSegment::new("aa", 0.2, 0.3, "u"),
            PhoneSegment::new("w", 0.3, 0.4, "u"),
            PhoneSegment::new("dcl", 0.4, 0.45, "u"),
            PhoneSegment::new("d", 0.45, 0.47, "u"),
        ];
        let map = PhoneClassMap::english();
        let lms = derive_landmarks(&segs, &map).unwrap();
        let r = extract_regions(&audio, &lms, &map).unwrap();
        let kinds: Vec<_> = r.iter().map(|r| r.landmark.kind).collect();
        assert_eq!(kinds, vec![LandmarkType::Sc, LandmarkType::Sr]);
        assert!(r.iter().all(|r| r.label == Label::Voiced));
    }

    #[test]
    fn sourceless_landmark_is_an_error() {
        let audio = ramp(16_000);
        let err = extract_regions(
            &audio,
            &[Landmark::new(0.1, LandmarkType::Fc)],
            &PhoneClassMap::english(),
        );
        assert!(err.is_err());
    }
}
