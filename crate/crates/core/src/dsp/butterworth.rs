//! Minimum-order Butterworth lowpass/bandpass design by the bilinear
//! transform with prewarping, realised as cascaded second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ORDER: usize = 40;

/// Pass/stop band edges in Hz. `pass_lo == 0` designs a lowpass, in which
/// case `stop_lo` is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub pass_lo: f64,
    pub pass_hi: f64,
    pub stop_lo: f64,
    pub stop_hi: f64,
    pub max_passband_ripple_db: f64,
    pub min_stopband_atten_db: f64,
}

impl BandpassSpec {
    pub fn lowpass(pass_hi: f64, stop_hi: f64) -> Self {
        Self {
            pass_lo: 0.0,
            pass_hi,
            stop_lo: 0.0,
            stop_hi,
            max_passband_ripple_db: 3.0,
            min_stopband_atten_db: 40.0,
        }
    }

    pub fn bandpass(pass_lo: f64, pass_hi: f64, stop_lo: f64, stop_hi: f64) -> Self {
        Self {
            pass_lo,
            pass_hi,
            stop_lo,
            stop_hi,
            max_passband_ripple_db: 3.0,
            min_stopband_atten_db: 40.0,
        }
    }

    pub fn is_lowpass(&self) -> bool {
        self.pass_lo <= 0.0
    }

    fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyq = sample_rate / 2.0;
        let ordered = if self.is_lowpass() {
            0.0 < self.pass_hi && self.pass_hi < self.stop_hi && self.stop_hi < nyq
        } else {
            0.0 < self.stop_lo
                && self.stop_lo < self.pass_lo
                && self.pass_lo < self.pass_hi
                && self.pass_hi < self.stop_hi
                && self.stop_hi < nyq
        };
        if !ordered {
            return Err(Error::invalid(format!(
                "band edges {self:?} must satisfy stop_lo < pass_lo < pass_hi < stop_hi < {nyq}"
            )));
        }
        if self.max_passband_ripple_db <= 0.0
            || self.min_stopband_atten_db <= self.max_passband_ripple_db
        {
            return Err(Error::invalid(
                "need 0 < passband ripple < stopband attenuation",
            ));
        }
        Ok(())
    }
}

/// `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2)
            / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    /// Order of the analog lowpass prototype.
    pub order: usize,
    pub sample_rate: f64,
}

impl SosFilter {
    /// Causal filtering from zero initial state.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = signal.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let input = *x;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * y + z2;
                z2 = s.b[2] * input - s.a[1] * y;
                *x = y;
            }
        }
        out
    }

    /// Filters `context ++ signal` and returns only the part aligned with `signal`.
    pub fn apply_with_context(&self, context: &[f64], signal: &[f64]) -> Vec<f64> {
        let mut joined = Vec::with_capacity(context.len() + signal.len());
        joined.extend_from_slice(context);
        joined.extend_from_slice(signal);
        let mut y = self.apply(&joined);
        y.drain(..context.len());
        y
    }

    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }
}

/// Smallest Butterworth design meeting `spec`, with the cutoff placed
/// geometrically between the passband-exact and stopband-exact choices so
/// both edges hold with margin.
pub fn butterworth_bandpass(spec: &BandpassSpec, sample_rate: f64) -> Result<SosFilter> {
    spec.validate(sample_rate)?;
    let warp = |f: f64| (PI * f / sample_rate).tan();
    let gp = 10f64.powf(spec.max_passband_ripple_db / 10.0) - 1.0;
    let gs = 10f64.powf(spec.min_stopband_atten_db / 10.0) - 1.0;

    // prototype frequency of the binding stopband edge (passband edge at 1)
    let (selectivity, band) = if spec.is_lowpass() {
        let wp = warp(spec.pass_hi);
        (warp(spec.stop_hi) / wp, None)
    } else {
        let (wp1, wp2) = (warp(spec.pass_lo), warp(spec.pass_hi));
        let w0_sq = wp1 * wp2;
        let bw = wp2 - wp1;
        let map = |w: f64| ((w * w - w0_sq) / (w * bw)).abs();
        (
            map(warp(spec.stop_lo)).min(map(warp(spec.stop_hi))),
            Some((w0_sq, bw)),
        )
    };
    let order = ((gs / gp).log10() / (2.0 * selectivity.log10())).ceil() as usize;
    if order == 0 || order > MAX_ORDER {
        return Err(Error::invalid(format!(
            "spec needs Butterworth order {order} (max {MAX_ORDER}); infeasible at {sample_rate} Hz"
        )));
    }
    let n = order as f64;
    let wc_pass = gp.powf(-1.0 / (2.0 * n));
    let wc_stop = selectivity * gs.powf(-1.0 / (2.0 * n));
    let wc = (wc_pass * wc_stop).sqrt();

    // left-half-plane prototype poles with Im >= 0; conjugates implied
    let proto: Vec<Complex64> = (0..order)
        .map(|k| Complex64::from_polar(wc, PI * (2 * k + order + 1) as f64 / (2.0 * n)))
        .filter(|p| p.im >= -1e-12)
        .map(|p| {
            if p.im.abs() < 1e-12 {
                Complex64::new(p.re, 0.0)
            } else {
                p
            }
        })
        .collect();

    let bilinear = |s: Complex64| (1.0 + s) / (1.0 - s);
    let mut sections = Vec::new();
    match band {
        None => {
            let wp = warp(spec.pass_hi);
            for p in proto {
                let z = bilinear(p * wp);
                if p.im == 0.0 {
                    let r = z.re;
                    sections.push(normalize(
                        Biquad {
                            b: [1.0, 1.0, 0.0],
                            a: [-r, 0.0],
                        },
                        0.0,
                        sample_rate,
                    ));
                } else {
                    sections.push(normalize(
                        conjugate_pair_section([1.0, 2.0, 1.0], z),
                        0.0,
                        sample_rate,
                    ));
                }
            }
        }
        Some((w0_sq, bw)) => {
            let center = (2.0 * w0_sq.sqrt().atan()) * sample_rate / (2.0 * PI);
            for p in proto {
                let disc = (p * p * bw * bw - 4.0 * w0_sq).sqrt();
                let s1 = (p * bw + disc) / 2.0;
                let s2 = (p * bw - disc) / 2.0;
                if p.im == 0.0 {
                    let (z1, z2) = (bilinear(s1), bilinear(s2));
                    let a1 = -(z1 + z2).re;
                    let a2 = (z1 * z2).re;
                    sections.push(normalize(
                        Biquad {
                            b: [1.0, 0.0, -1.0],
                            a: [a1, a2],
                        },
                        center,
                        sample_rate,
                    ));
                } else {
                    for s in [s1, s2] {
                        sections.push(normalize(
                            conjugate_pair_section([1.0, 0.0, -1.0], bilinear(s)),
                            center,
                            sample_rate,
                        ));
                    }
                }
            }
        }
    }
    Ok(SosFilter {
        sections,
        order,
        sample_rate,
    })
}

fn conjugate_pair_section(b: [f64; 3], z: Complex64) -> Biquad {
    Biquad {
        b,
        a: [-2.0 * z.re, z.norm_sqr()],
    }
}

/// Scales the numerator so the section has unit gain at `freq_hz`.
fn normalize(mut s: Biquad, freq_hz: f64, sample_rate: f64) -> Biquad {
    let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / sample_rate);
    let g = s.response(z_inv).norm();
    s.b.iter_mut().for_each(|v| *v /= g);
    s
}
