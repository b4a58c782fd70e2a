use std::f64::consts::PI;
use std::path::Path;

use super::regions::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Reads a mono 16-bit PCM WAV, resampling to 16 kHz when needed.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::invalid(format!(
            "{}: expected 16-bit PCM, got {:?} {} bits",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(Error::invalid(format!(
            "{}: expected mono, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    if spec.sample_rate != SAMPLE_RATE {
        log::warn!(
            "{}: resampling {} Hz to {} Hz",
            path.display(),
            spec.sample_rate,
            SAMPLE_RATE
        );
        return Ok(Waveform::new(
            resample(&samples, spec.sample_rate, SAMPLE_RATE),
            SAMPLE_RATE,
        ));
    }
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes a waveform as mono 16-bit PCM, clipping to full scale.
pub fn write_wav(path: &Path, audio: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &x in &audio.samples {
        writer.write_sample(quantize(x))?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

const SINC_HALF_WIDTH: f64 = 16.0;

/// Windowed-sinc (Blackman) sample-rate conversion.
pub fn resample(input: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || input.is_empty() {
        return input.to_vec();
    }
    let ratio = f64::from(to) / f64::from(from);
    let cutoff = ratio.min(1.0);
    let half = SINC_HALF_WIDTH / cutoff;
    let out_len = (input.len() as f64 * ratio).round() as usize;
    (0..out_len)
        .map(|m| {
            let t = m as f64 / ratio;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(input.len() - 1);
            (lo..=hi)
                .map(|k| {
                    let d = t - k as f64;
                    let x = cutoff * d;
                    let sinc = if x.abs() < 1e-12 {
                        1.0
                    } else {
                        (PI * x).sin() / (PI * x)
                    };
                    let u = (d / half + 1.0) * 0.5;
                    let w = 0.42 - 0.5 * (2.0 * PI * u).cos() + 0.08 * (4.0 * PI * u).cos();
                    input[k] * cutoff * sinc * w
                })
                .sum()
        })
        .collect()
}
