//! Time-aligned transcriptions, phone classes, landmarks, landmark regions
//! and the synthetic corpus generator.

mod alignment;
mod landmarks;
mod phones;
mod regions;
mod synth;
pub mod wav;

pub use alignment::{parse_alignment, write_alignment, PhoneSegment};
pub use landmarks::{
    derive_landmarks, label_voicing, read_landmark_file, write_landmark_file, Landmark,
    LandmarkType,
};
pub use phones::{Label, Manner, PhoneClass, PhoneClassMap, Voicing};
pub use regions::{
    extract_regions, LandmarkRegion, Waveform, REGION_SAMPLES, REGION_SECONDS, SAMPLE_RATE,
};
pub use synth::{synthesize_corpus, SynthCorpus, SynthSpec, SynthUtterance, TokenTruth};
