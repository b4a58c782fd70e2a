//! Landmark feature extraction: manual cues, MFCC baselines and raw
//! spectral inputs for the networks, plus standardization and CSV tables.

mod cues;
mod mfcc;
mod raw;
mod standardize;
mod table;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    derive_landmarks, extract_regions, LandmarkRegion, PhoneClassMap, PhoneSegment, SynthCorpus,
    Waveform,
};
use crate::dsp::mel::MelFilterbank;
use crate::dsp::mfcc::MfccConfig;
use crate::error::{Error, Result};

pub use cues::{CueConfig, CueContext, CueExtractor, CueVector, CUE_DIMS, RATIO_EPS};
pub use mfcc::{mfcc_features, MfccVariant};
pub use raw::{RawInputBuilder, RawKind, FB_BANDS, FB_LOG_EPS, RAW_FFT_SIZE};
pub use standardize::{Standardizer, STD_FLOOR};
pub use table::{FeatureRow, FeatureTable};

/// Every feature representation the pipeline can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Cues,
    Mfcc(MfccVariant),
    Raw(RawKind),
}

impl FeatureKind {
    pub fn all() -> Vec<FeatureKind> {
        let mut out = vec![FeatureKind::Cues];
        out.extend(MfccVariant::ALL.map(FeatureKind::Mfcc));
        out.extend(RawKind::ALL.map(FeatureKind::Raw));
        out
    }

    pub fn dims(self) -> usize {
        match self {
            FeatureKind::Cues => CUE_DIMS,
            FeatureKind::Mfcc(v) => v.dims(),
            FeatureKind::Raw(k) => k.dims(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Cues => "cues",
            FeatureKind::Mfcc(v) => v.as_str(),
            FeatureKind::Raw(k) => k.as_str(),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown feature kind {s:?}")))
    }
}

impl Serialize for FeatureKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FeatureKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub cues: CueConfig,
    pub mfcc: MfccConfig,
}

/// Turns utterances into feature rows of any [`FeatureKind`].
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cues: CueExtractor,
    mfcc: MfccConfig,
    mel: MelFilterbank,
    raw: RawInputBuilder,
}

impl FeatureExtractor {
    pub fn new(config: &FeatureConfig, sample_rate: u32) -> Result<Self> {
        config.mfcc.validate()?;
        Ok(Self {
            cues: CueExtractor::new(config.cues.clone(), sample_rate)?,
            mel: config.mfcc.filterbank(sample_rate)?,
            mfcc: config.mfcc.clone(),
            raw: RawInputBuilder::new(sample_rate)?,
        })
    }

    pub fn cue_extractor(&self) -> &CueExtractor {
        &self.cues
    }

    /// Feature vector of one region; `segments` must be sorted and contain the region's source phone.
    pub fn region_features(
        &self,
        audio: &Waveform,
        segments: &[PhoneSegment],
        region: &LandmarkRegion,
        map: &PhoneClassMap,
        kind: FeatureKind,
    ) -> Result<Vec<f64>> {
        let source = region
            .landmark
            .source
            .as_ref()
            .ok_or_else(|| Error::Structure("region landmark has no source phone".into()))?;
        match kind {
            FeatureKind::Cues => {
                let index = segments.iter().position(|s| s == source).ok_or_else(|| {
                    Error::Structure(format!("phone {} not in alignment", source.label))
                })?;
                let ctx = CueContext::resolve(segments, index, map)?;
                Ok(self
                    .cues
                    .manual_cues(region, &ctx, audio)?
                    .to_array()
                    .to_vec())
            }
            FeatureKind::Mfcc(v) => mfcc_features(audio, source, region, v, &self.mfcc, &self.mel),
            FeatureKind::Raw(k) => self.raw.build(&region.samples, k),
        }
    }

    /// Rows for every obstruent landmark of one utterance, in landmark order.
    pub fn utterance_rows(
        &self,
        audio: &Waveform,
        segments: &[PhoneSegment],
        map: &PhoneClassMap,
        kind: FeatureKind,
    ) -> Result<Vec<FeatureRow>> {
        let mut sorted = segments.to_vec();
        sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
        let landmarks = derive_landmarks(&sorted, map)?;
        let regions = extract_regions(audio, &landmarks, map)?;
        regions
            .iter()
            .map(|r| {
                Ok(FeatureRow {
                    utterance_id: r.utterance_id().to_string(),
                    landmark_time: r.landmark.time,
                    landmark_type: r.landmark.kind,
                    label: r.label,
                    values: self.region_features(audio, &sorted, r, map, kind)?,
                })
            })
            .collect()
    }

    /// Feature table over many utterances, computed in parallel but kept in input order.
    pub fn table<'a, I>(
        &self,
        utterances: I,
        map: &PhoneClassMap,
        kind: FeatureKind,
    ) -> Result<FeatureTable>
    where
        I: IntoParallelIterator<Item = (&'a Waveform, &'a [PhoneSegment])>,
        I::Iter: IndexedParallelIterator,
    {
        let per_utt: Vec<Vec<FeatureRow>> = utterances
            .into_par_iter()
            .map(|(audio, segs)| self.utterance_rows(audio, segs, map, kind))
            .collect::<Result<_>>()?;
        Ok(FeatureTable {
            kind,
            rows: per_utt.into_iter().flatten().collect(),
        })
    }

    pub fn synth_table(
        &self,
        corpus: &SynthCorpus,
        map: &PhoneClassMap,
        kind: FeatureKind,
    ) -> Result<FeatureTable> {
        let items: Vec<(&Waveform, &[PhoneSegment])> = corpus
            .utterances
            .iter()
            .map(|u| (&u.audio, u.segments.as_slice()))
            .collect();
        self.table(items, map, kind)
    }
}
