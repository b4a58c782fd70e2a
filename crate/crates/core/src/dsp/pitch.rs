//! Normalized cross-correlation pitch tracking with a dynamic-programming
//! pass over per-frame candidates plus an unvoiced state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    /// Correlation window length in seconds.
    pub window_s: f64,
    pub hop_s: f64,
    /// Cost of switching between voiced and unvoiced states.
    pub voicing_switch_cost: f64,
    /// Cost per octave of F0 change between consecutive voiced frames.
    pub octave_cost: f64,
    /// Linear penalty on long lags, scaled so the longest lag loses this fraction of its peak.
    pub lag_weight: f64,
    /// Minimum NCCF value for a local maximum to become a candidate.
    pub candidate_threshold: f64,
    pub max_candidates: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f0_min: 50.0,
            f0_max: 400.0,
            window_s: 0.010,
            hop_s: 0.005,
            voicing_switch_cost: 0.2,
            octave_cost: 0.35,
            lag_weight: 0.3,
            candidate_threshold: 0.3,
            max_candidates: 10,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return Err(Error::invalid("need 0 < f0_min < f0_max"));
        }
        if self.window_s <= 0.0 || self.hop_s <= 0.0 || self.max_candidates == 0 {
            return Err(Error::invalid(
                "window, hop and candidate count must be positive",
            ));
        }
        Ok(())
    }

    pub fn lag_range(&self, sample_rate: u32) -> (usize, usize) {
        let sr = f64::from(sample_rate);
        let min = (sr / self.f0_max).floor().max(1.0) as usize;
        let max = (sr / self.f0_min).ceil() as usize;
        (min, max)
    }

    pub fn window_len(&self, sample_rate: u32) -> usize {
        ((self.window_s * f64::from(sample_rate)).round() as usize).max(1)
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ((self.hop_s * f64::from(sample_rate)).round() as usize).max(1)
    }

    /// Samples needed after a frame start: window plus the longest lag (and one for interpolation).
    pub fn frame_span(&self, sample_rate: u32) -> usize {
        self.window_len(sample_rate) + self.lag_range(sample_rate).1 + 1
    }
}

/// `φ(k) = Σ s(n)s(n+k) / sqrt(Σ s(n)² Σ s(n+k)²)` over `window` samples for
/// every lag in `min_lag..=max_lag`. Zero-energy windows give 0. Samples
/// past the end of `frame` count as zero.
pub fn nccf(frame: &[f64], min_lag: usize, max_lag: usize, window: usize) -> Vec<f64> {
    let at = |i: usize| frame.get(i).copied().unwrap_or(0.0);
    let e0: f64 = (0..window).map(|n| at(n) * at(n)).sum();
    let mut ek: f64 = (min_lag..min_lag + window).map(|n| at(n) * at(n)).sum();
    let mut out = Vec::with_capacity(max_lag + 1 - min_lag);
    for k in min_lag..=max_lag {
        if k > min_lag {
            let (leave, enter) = (at(k - 1), at(k + window - 1));
            ek += enter * enter - leave * leave;
        }
        let denom = (e0 * ek.max(0.0)).sqrt();
        let value = if denom > 1e-300 && e0 > 0.0 {
            let num: f64 = (0..window).map(|n| at(n) * at(n + k)).sum();
            (num / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        out.push(value);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame {
    /// Centre of the correlation window.
    pub time_s: f64,
    pub f0: Option<f64>,
    /// Highest NCCF peak in the frame (the chosen candidate's value when voiced).
    pub nccf_peak: f64,
    pub voicing_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PitchTrack {
    pub frames: Vec<PitchFrame>,
}

impl PitchTrack {
    pub fn voiced_f0(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().filter_map(|f| f.f0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    lag: f64,
    value: f64,
}

/// Pitch track over `signal`; frames start every hop while a full
/// correlation window fits in the signal.
pub fn track_pitch(signal: &[f64], sample_rate: u32, config: &PitchConfig) -> Result<PitchTrack> {
    config.validate()?;
    let sr = f64::from(sample_rate);
    let (min_lag, max_lag) = config.lag_range(sample_rate);
    let window = config.window_len(sample_rate);
    let hop = config.hop_len(sample_rate);
    if signal.len() < window {
        return Ok(PitchTrack::default());
    }
    let n_frames = 1 + (signal.len() - window) / hop;

    let mut cands: Vec<Vec<Candidate>> = Vec::with_capacity(n_frames);
    let mut frame_max = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * hop;
        // one lag either side for interpolation at the range ends
        let lo = min_lag.saturating_sub(1).max(1);
        let phi = nccf(&signal[start..], lo, max_lag + 1, window);
        let get = |k: usize| phi[k - lo];
        let mut found: Vec<Candidate> = Vec::new();
        let mut best = 0.0f64;
        for k in min_lag..=max_lag {
            let (l, c, r) = (get(k - 1), get(k), get(k + 1));
            best = best.max(c);
            if c >= config.candidate_threshold && c >= l && c > r {
                let denom = l - 2.0 * c + r;
                let (shift, value) = if denom < 0.0 {
                    let d = 0.5 * (l - r) / denom;
                    (d, c - 0.25 * (l - r) * d)
                } else {
                    (0.0, c)
                };
                found.push(Candidate {
                    lag: k as f64 + shift,
                    value: value.clamp(-1.0, 1.0),
                });
            }
        }
        found.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.lag.total_cmp(&b.lag)));
        found.truncate(config.max_candidates);
        best = found.iter().map(|c| c.value).fold(best, f64::max);
        cands.push(found);
        frame_max.push(best);
    }

    // state 0 is unvoiced, state i > 0 is candidate i - 1
    let local = |f: usize, s: usize| -> f64 {
        if s == 0 {
            frame_max[f].max(0.0)
        } else {
            let c = cands[f][s - 1];
            1.0 - c.value * (1.0 - config.lag_weight * c.lag / max_lag as f64)
        }
    };
    let transition = |pf: usize, ps: usize, f: usize, s: usize| -> f64 {
        match (ps, s) {
            (0, 0) => 0.0,
            (0, _) | (_, 0) => config.voicing_switch_cost,
            _ => {
                let a = cands[pf][ps - 1].lag;
                let b = cands[f][s - 1].lag;
                config.octave_cost * (a / b).log2().abs()
            }
        }
    };

    let mut cost: Vec<f64> = (0..=cands[0].len()).map(|s| local(0, s)).collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; cost.len()]];
    for (f, cf) in cands.iter().enumerate().take(n_frames).skip(1) {
        let mut next = Vec::with_capacity(cf.len() + 1);
        let mut ptr = Vec::with_capacity(cf.len() + 1);
        for s in 0..=cf.len() {
            let (arg, best) = cost
                .iter()
                .enumerate()
                .map(|(ps, &c)| (ps, c + transition(f - 1, ps, f, s)))
                .fold(
                    (0, f64::INFINITY),
                    |acc, x| if x.1 < acc.1 { x } else { acc },
                );
            next.push(best + local(f, s));
            ptr.push(arg);
        }
        cost = next;
        back.push(ptr);
    }
    let mut state = cost
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (s, &c)| if c < acc.1 { (s, c) } else { acc },
        )
        .0;
    let mut path = vec![0; n_frames];
    for f in (0..n_frames).rev() {
        path[f] = state;
        state = back[f][state];
    }

    let frames = path
        .iter()
        .enumerate()
        .map(|(f, &s)| {
            let time_s = (f * hop) as f64 / sr + window as f64 / (2.0 * sr);
            if s == 0 {
                PitchFrame {
                    time_s,
                    f0: None,
                    nccf_peak: frame_max[f],
                    voicing_prob: 0.0,
                }
            } else {
                let c = cands[f][s - 1];
                PitchFrame {
                    time_s,
                    f0: Some(sr / c.lag),
                    nccf_peak: c.value,
                    voicing_prob: c.value.max(0.0),
                }
            }
        })
        .collect();
    Ok(PitchTrack { frames })
}
