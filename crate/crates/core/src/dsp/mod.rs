//! Signal-processing kernels: windows, FFT, mel filterbank, MFCCs,
//! Butterworth band filters, band energies, NCCF pitch tracking and LPC.

pub mod butterworth;
pub mod energy;
pub mod fft;
pub mod lpc;
pub mod mel;
pub mod mfcc;
pub mod pitch;
pub mod window;

pub use butterworth::{butterworth_bandpass, BandpassSpec, Biquad, SosFilter};
pub use energy::{mean_square, rms, Band, BandEnergy};
pub use fft::{magnitude_fft, Spectrum};
pub use lpc::{formants, lpc, LpcModel};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use mfcc::{deltas, mfcc_frames, with_dynamics, MfccConfig};
pub use pitch::{nccf, track_pitch, PitchConfig, PitchFrame, PitchTrack};
pub use window::hamming_window;
