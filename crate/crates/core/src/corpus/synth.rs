//! Seeded source-filter generator for labelled obstruent + vowel corpora.
//!
//! Voiced obstruents carry a glottal pulse train (voice bar during stop
//! closures, voicing mixed into frication) and a short release; unvoiced
//! ones are noise only with long aspiration. Every consonant is followed by
//! a two-resonator vowel whose F1 rises from a low onset after voiced
//! consonants. Regime knobs shift speaker F0, noise, channel tilt and the
//! place-of-articulation mix so that cross-corpus shifts can be simulated.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::alignment::PhoneSegment;
use super::phones::Label;
use super::regions::{Waveform, SAMPLE_RATE};
use crate::dsp::butterworth::{butterworth_bandpass, BandpassSpec, SosFilter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_utterances: usize,
    pub tokens_per_utterance: usize,
    /// Speaker F0 range in Hz, within 50–400.
    pub f0_range: (f64, f64),
    pub snr_db: f64,
    pub seed: u64,
    /// Fraction of voiced tokens, realised exactly (rounded to whole tokens).
    pub class_ratio: f64,
    /// Pole of a first-order channel filter; positive darkens, negative brightens.
    pub channel_tilt: f64,
    /// In [-1, 1]. Positive makes voiced obstruents favour front, non-sibilant
    /// places and unvoiced ones sibilant/back places; negative reverses it.
    pub place_skew: f64,
    /// Probability that a voiced obstruent is produced with weak voicing.
    pub devoicing: f64,
    /// Multiplier on vowel formant frequencies.
    pub formant_scale: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_utterances: 10,
            tokens_per_utterance: 10,
            f0_range: (90.0, 180.0),
            snr_db: 25.0,
            seed: 7,
            class_ratio: 0.5,
            channel_tilt: 0.0,
            place_skew: 0.0,
            devoicing: 0.1,
            formant_scale: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_utterances == 0 || self.tokens_per_utterance == 0 {
            return Err(Error::invalid("utterance and token counts must be >= 1"));
        }
        let (lo, hi) = self.f0_range;
        if !(50.0..=400.0).contains(&lo) || !(50.0..=400.0).contains(&hi) || lo > hi {
            return Err(Error::invalid(format!(
                "f0 range {lo}..{hi} must lie within 50..400 Hz"
            )));
        }
        if !(self.class_ratio > 0.0 && self.class_ratio < 1.0) {
            return Err(Error::invalid("class ratio must be in (0, 1)"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr must be finite"));
        }
        if self.channel_tilt.abs() >= 0.95 {
            return Err(Error::invalid("channel tilt must be within (-0.95, 0.95)"));
        }
        if !(-1.0..=1.0).contains(&self.place_skew) || !(0.0..=1.0).contains(&self.devoicing) {
            return Err(Error::invalid(
                "place skew must be in [-1, 1], devoicing in [0, 1]",
            ));
        }
        if !(0.5..=2.0).contains(&self.formant_scale) {
            return Err(Error::invalid("formant scale must be in [0.5, 2]"));
        }
        Ok(())
    }

    pub fn total_tokens(&self) -> usize {
        self.n_utterances * self.tokens_per_utterance
    }

    pub fn voiced_tokens(&self) -> usize {
        (self.class_ratio * self.total_tokens() as f64).round() as usize
    }
}

/// Ground truth for one synthesized obstruent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTruth {
    pub utterance_id: String,
    pub index: usize,
    /// Obstruent phone; for stops the release phone (`t`, `b`, ...).
    pub phone: String,
    pub label: Label,
    /// Generator F0 at the vowel midpoint.
    pub f0: f64,
    pub start: f64,
    pub end: f64,
    /// Release-segment duration for stops, frication duration otherwise.
    pub vot: f64,
    /// Vowel following the obstruent.
    pub vowel_start: f64,
    pub vowel_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub audio: Waveform,
    pub segments: Vec<PhoneSegment>,
    pub tokens: Vec<TokenTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub utterances: Vec<SynthUtterance>,
}

impl SynthCorpus {
    pub fn tokens(&self) -> impl Iterator<Item = &TokenTruth> {
        self.utterances.iter().flat_map(|u| u.tokens.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Stop,
    Fricative,
    Affricate,
}

#[derive(Debug, Clone, Copy)]
struct Place {
    voiced: &'static str,
    unvoiced: &'static str,
    closure: [&'static str; 2],
    /// Noise band in Hz.
    band: (f64, f64),
    /// Noise RMS relative to the vowel.
    level: f64,
    /// +1 favoured by voiced tokens under positive skew, -1 by unvoiced.
    bias: f64,
}

const FRICATIVES: [Place; 4] = [
    Place {
        voiced: "v",
        unvoiced: "f",
        closure: ["", ""],
        band: (1200.0, 7000.0),
        level: 0.10,
        bias: 1.0,
    },
    Place {
        voiced: "dh",
        unvoiced: "th",
        closure: ["", ""],
        band: (1500.0, 7000.0),
        level: 0.08,
        bias: 1.0,
    },
    Place {
        voiced: "z",
        unvoiced: "s",
        closure: ["", ""],
        band: (4000.0, 7500.0),
        level: 0.35,
        bias: -1.0,
    },
    Place {
        voiced: "zh",
        unvoiced: "sh",
        closure: ["", ""],
        band: (2200.0, 5000.0),
        level: 0.35,
        bias: -1.0,
    },
];

const STOPS: [Place; 3] = [
    Place {
        voiced: "b",
        unvoiced: "p",
        closure: ["bcl", "pcl"],
        band: (400.0, 1800.0),
        level: 0.25,
        bias: 1.0,
    },
    Place {
        voiced: "d",
        unvoiced: "t",
        closure: ["dcl", "tcl"],
        band: (3000.0, 6500.0),
        level: 0.40,
        bias: -1.0,
    },
    Place {
        voiced: "g",
        unvoiced: "k",
        closure: ["gcl", "kcl"],
        band: (1500.0, 3200.0),
        level: 0.40,
        bias: 0.0,
    },
];

const AFFRICATE: Place = Place {
    voiced: "jh",
    unvoiced: "ch",
    closure: ["dcl", "tcl"],
    band: (2200.0, 5500.0),
    level: 0.35,
    bias: -1.0,
};

/// (phone, F1, F2) vowel targets.
const VOWELS: [(&str, f64, f64); 5] = [
    ("aa", 730.0, 1100.0),
    ("iy", 300.0, 2300.0),
    ("uw", 320.0, 900.0),
    ("eh", 530.0, 1850.0),
    ("ow", 500.0, 950.0),
];

const SR: f64 = SAMPLE_RATE as f64;

/// Generates a corpus. Identical specs give bit-identical output.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let total = spec.total_tokens();
    let mut labels = vec![Label::Unvoiced; total];
    labels[..spec.voiced_tokens()].fill(Label::Voiced);
    let mut label_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    label_rng.set_stream(u64::MAX);
    labels.shuffle(&mut label_rng);

    let shaper = Shaper::new()?;
    let utterances = labels
        .chunks(spec.tokens_per_utterance)
        .enumerate()
        .map(|(u, labels)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(u as u64);
            synth_utterance(spec, &format!("syn{:05}", u), labels, &shaper, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCorpus {
        spec: spec.clone(),
        utterances,
    })
}

/// Pre-designed shaping filters.
struct Shaper {
    voice_bar: SosFilter,
}

impl Shaper {
    fn new() -> Result<Self> {
        let mut spec = BandpassSpec::lowpass(300.0, 700.0);
        spec.min_stopband_atten_db = 24.0;
        Ok(Self {
            voice_bar: butterworth_bandpass(&spec, SR)?,
        })
    }
}

fn band_noise(rng: &mut ChaCha8Rng, n: usize, band: (f64, f64)) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..n + 256).map(|_| normal.sample(rng)).collect();
    let (lo, hi) = band;
    let mut spec = BandpassSpec::bandpass(lo, hi, lo * 0.6, (hi * 1.25).min(7900.0));
    spec.min_stopband_atten_db = 20.0;
    let filter = butterworth_bandpass(&spec, SR)?;
    let mut y = filter.apply(&white);
    y.drain(..256);
    normalize_rms(&mut y, 1.0);
    Ok(y)
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}

/// Band-limited glottal source, harmonics rolling off at 12 dB/octave.
/// `f0` gives the instantaneous frequency per sample; `phase` carries over.
fn glottal_source(f0: &[f64], phase: &mut f64) -> Vec<f64> {
    f0.iter()
        .map(|&f| {
            *phase = (*phase + 2.0 * PI * f / SR) % (2.0 * PI);
            let n_harm = (7500.0 / f).floor() as usize;
            let c1 = phase.cos();
            let (mut prev, mut cur) = (1.0, c1);
            let mut acc = 0.0;
            for h in 1..=n_harm {
                acc += cur / (h * h) as f64;
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
            acc
        })
        .collect()
}

/// Two-pole resonator with time-varying centre frequency.
fn resonate(x: &mut [f64], freq: &[f64], bandwidth: f64) {
    let r = (-PI * bandwidth / SR).exp();
    let (mut y1, mut y2) = (0.0, 0.0);
    for (v, &f) in x.iter_mut().zip(freq) {
        let c = 2.0 * r * (2.0 * PI * f / SR).cos();
        // unity gain at DC keeps levels comparable across formants
        let g = 1.0 - c + r * r;
        let y = g * *v + c * y1 - r * r * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn pick_place<'a>(rng: &mut ChaCha8Rng, places: &'a [Place], label: Label, skew: f64) -> &'a Place {
    let sign = if label.is_voiced() { 1.0 } else { -1.0 };
    let weights: Vec<f64> = places
        .iter()
        .map(|p| (1.0 + sign * skew * p.bias).max(0.0) + 1e-3)
        .collect();
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (p, w) in places.iter().zip(&weights) {
        if u < *w {
            return p;
        }
        u -= w;
    }
    &places[places.len() - 1]
}

fn secs(n: usize) -> f64 {
    n as f64 / SR
}

fn samples(rng: &mut ChaCha8Rng, lo_ms: f64, hi_ms: f64) -> usize {
    (rng.random_range(lo_ms..=hi_ms) * SR / 1000.0).round() as usize
}

fn synth_utterance(
    spec: &SynthSpec,
    id: &str,
    labels: &[Label],
    shaper: &Shaper,
    rng: &mut ChaCha8Rng,
) -> Result<SynthUtterance> {
    let speaker_f0 = rng.random_range(spec.f0_range.0..=spec.f0_range.1);
    let mut audio: Vec<f64> = Vec::new();
    let mut segments = Vec::new();
    let mut tokens = Vec::new();
    let mut phase = 0.0;

    let mut push_segment = |label: &str, start: usize, end: usize| {
        segments.push(PhoneSegment::new(label, secs(start), secs(end), id));
    };

    let lead = samples(rng, 60.0, 100.0);
    audio.resize(lead, 0.0);
    push_segment("h#", 0, lead);

    for (index, &label) in labels.iter().enumerate() {
        let voiced = label.is_voiced();
        let weak_voicing = voiced && rng.random::<f64>() < spec.devoicing;
        let voicing_gain = if !voiced {
            0.0
        } else if weak_voicing {
            rng.random_range(0.0..0.25)
        } else {
            rng.random_range(0.6..1.0)
        };
        let token_f0 = (speaker_f0 * rng.random_range(0.93..1.07)).clamp(50.0, 400.0);
        let roll = rng.random::<f64>();
        let kind = if roll < 0.45 {
            Kind::Stop
        } else if roll < 0.9 {
            Kind::Fricative
        } else {
            Kind::Affricate
        };
        let place = match kind {
            Kind::Stop => *pick_place(rng, &STOPS, label, spec.place_skew),
            Kind::Fricative => *pick_place(rng, &FRICATIVES, label, spec.place_skew),
            Kind::Affricate => AFFRICATE,
        };
        let phone = if voiced { place.voiced } else { place.unvoiced };
        let token_start = audio.len();

        // consonant
        let vot_samples;
        match kind {
            Kind::Stop | Kind::Affricate => {
                let closure = if voiced {
                    samples(rng, 45.0, 80.0)
                } else {
                    samples(rng, 50.0, 90.0)
                };
                let mut seg = vec![0.0; closure];
                if voicing_gain > 0.0 {
                    let src = glottal_source(&vec![token_f0; closure], &mut phase);
                    let mut bar = shaper.voice_bar.apply(&src);
                    normalize_rms(&mut bar, 0.06 * voicing_gain);
                    seg.iter_mut().zip(&bar).for_each(|(s, b)| *s += b);
                }
                let closure_phone = place.closure[if voiced { 0 } else { 1 }];
                let c0 = audio.len();
                audio.extend_from_slice(&seg);
                push_segment(closure_phone, c0, audio.len());

                let release = match (kind, voiced) {
                    (Kind::Affricate, true) => samples(rng, 40.0, 70.0),
                    (Kind::Affricate, false) => samples(rng, 60.0, 100.0),
                    (_, true) => samples(rng, 10.0, 25.0),
                    (_, false) => samples(rng, 45.0, 90.0),
                };
                let burst_len = samples(rng, 8.0, 15.0).min(release);
                let mut burst = band_noise(rng, release, place.band)?;
                let aspiration = band_noise(rng, release, (600.0, 6000.0))?;
                for (i, b) in burst.iter_mut().enumerate() {
                    let decay = (-(i as f64) / (0.004 * SR)).exp();
                    let tail = if kind == Kind::Affricate || i < burst_len {
                        place.level
                            * if kind == Kind::Affricate {
                                1.0
                            } else {
                                decay.max(0.3)
                            }
                    } else {
                        0.0
                    };
                    let breath = if voiced || kind == Kind::Affricate {
                        0.0
                    } else {
                        0.05
                    };
                    *b = *b * tail + aspiration[i] * breath;
                }
                if voicing_gain > 0.0 && kind == Kind::Affricate {
                    let src = glottal_source(&vec![token_f0; release], &mut phase);
                    let mut bar = shaper.voice_bar.apply(&src);
                    normalize_rms(&mut bar, 0.06 * voicing_gain);
                    burst
                        .iter_mut()
                        .zip(&bar)
                        .for_each(|(s, b)| *s = 0.6 * *s + b);
                }
                let r0 = audio.len();
                audio.extend_from_slice(&burst);
                push_segment(phone, r0, audio.len());
                vot_samples = release;
            }
            Kind::Fricative => {
                let dur = if voiced {
                    samples(rng, 60.0, 110.0)
                } else {
                    samples(rng, 100.0, 160.0)
                };
                let mut noise = band_noise(rng, dur, place.band)?;
                let level = place.level * if voiced { 0.5 } else { 1.0 };
                noise.iter_mut().for_each(|v| *v *= level);
                if voicing_gain > 0.0 {
                    let src = glottal_source(&vec![token_f0; dur], &mut phase);
                    let mut bar = shaper.voice_bar.apply(&src);
                    normalize_rms(&mut bar, 0.08 * voicing_gain);
                    noise.iter_mut().zip(&bar).for_each(|(s, b)| *s += b);
                }
                let f0_ = audio.len();
                audio.extend_from_slice(&noise);
                push_segment(phone, f0_, audio.len());
                vot_samples = dur;
            }
        }
        let cons_end = audio.len();

        // vowel with an F1 transition out of the consonant
        let (vphone, f1_target, f2_target) = VOWELS[rng.random_range(0..VOWELS.len())];
        let (f1_target, f2_target) = (
            f1_target * spec.formant_scale,
            f2_target * spec.formant_scale,
        );
        let vlen = samples(rng, 90.0, 160.0);
        let trans = samples(rng, 30.0, 45.0).min(vlen);
        let f1_onset = if voiced {
            (f1_target * 0.45).max(200.0)
        } else {
            f1_target * 0.85
        };
        let f0_track: Vec<f64> = (0..vlen)
            .map(|i| token_f0 * (1.0 - 0.04 * i as f64 / vlen as f64))
            .collect();
        let mut vowel = glottal_source(&f0_track, &mut phase);
        let f1: Vec<f64> = (0..vlen)
            .map(|i| {
                let a = (i as f64 / trans as f64).min(1.0);
                f1_onset + (f1_target - f1_onset) * a
            })
            .collect();
        resonate(&mut vowel, &f1, 90.0);
        resonate(&mut vowel, &vec![f2_target; vlen], 120.0);
        normalize_rms(&mut vowel, 0.2);
        // 5 ms onset ramp
        let ramp = (0.005 * SR) as usize;
        for (i, v) in vowel.iter_mut().take(ramp).enumerate() {
            *v *= i as f64 / ramp as f64;
        }
        audio.extend_from_slice(&vowel);
        push_segment(vphone, cons_end, audio.len());

        tokens.push(TokenTruth {
            utterance_id: id.to_string(),
            index,
            phone: phone.to_string(),
            label,
            f0: f0_track[vlen / 2],
            start: secs(token_start),
            end: secs(cons_end),
            vot: secs(vot_samples),
            vowel_start: secs(cons_end),
            vowel_end: secs(audio.len()),
        });

        // short pause between tokens
        let gap = samples(rng, 30.0, 60.0);
        let g0 = audio.len();
        audio.resize(g0 + gap, 0.0);
        push_segment("pau", g0, audio.len());
    }
    let tail = samples(rng, 60.0, 100.0);
    let t0 = audio.len();
    audio.resize(t0 + tail, 0.0);
    push_segment("h#", t0, audio.len());

    // channel, then additive noise relative to mean speech power
    if spec.channel_tilt != 0.0 {
        let p = spec.channel_tilt;
        let mut prev = 0.0;
        for v in audio.iter_mut() {
            prev = (1.0 - p.abs()) * *v + p * prev;
            *v = prev;
        }
    }
    let speech_power = audio.iter().map(|v| v * v).sum::<f64>() / audio.len() as f64;
    let noise_sd = (speech_power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for v in audio.iter_mut() {
        *v += noise_sd * normal.sample(rng);
    }
    let peak = audio.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = 0.8 / peak;
        audio.iter_mut().for_each(|v| *v *= g);
    }
    // quantize so that audio written to and read back from PCM16 is unchanged
    audio
        .iter_mut()
        .for_each(|v| *v = f64::from(super::wav::quantize(*v)) / 32768.0);

    Ok(SynthUtterance {
        id: id.to_string(),
        audio: Waveform::new(audio, SAMPLE_RATE),
        segments,
        tokens,
    })
}
