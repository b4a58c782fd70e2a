//! Consonant voicing detection anchored at phonetic landmarks.
//!
//! The crate covers the whole experiment: landmark derivation from phone
//! alignments ([`corpus`]), signal-processing kernels ([`dsp`]), the manual
//! cue / MFCC / raw spectral representations ([`features`]), SVM, MLP and
//! CNN classifiers ([`models`]), cross-corpus metrics ([`eval`]) and the
//! staged pipeline driven by the `voicing` CLI ([`pipeline`]).

pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod pipeline;

pub use error::{Error, Result};
