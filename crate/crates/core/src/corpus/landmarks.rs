use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::alignment::PhoneSegment;
use super::phones::{Label, Manner, PhoneClassMap, Voicing};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LandmarkType {
    Sc,
    Sr,
    Fc,
    Fr,
    Nc,
    Nr,
    V,
    G,
}

impl LandmarkType {
    pub const ALL: [LandmarkType; 8] = [
        LandmarkType::Sc,
        LandmarkType::Sr,
        LandmarkType::Fc,
        LandmarkType::Fr,
        LandmarkType::Nc,
        LandmarkType::Nr,
        LandmarkType::V,
        LandmarkType::G,
    ];

    pub fn is_closure(self) -> bool {
        matches!(self, LandmarkType::Sc | LandmarkType::Fc | LandmarkType::Nc)
    }

    pub fn is_release(self) -> bool {
        matches!(self, LandmarkType::Sr | LandmarkType::Fr | LandmarkType::Nr)
    }

    pub fn is_point(self) -> bool {
        matches!(self, LandmarkType::V | LandmarkType::G)
    }

    /// Stop and fricative landmarks are the ones that get classified.
    pub fn is_obstruent(self) -> bool {
        matches!(
            self,
            LandmarkType::Sc | LandmarkType::Sr | LandmarkType::Fc | LandmarkType::Fr
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkType::Sc => "Sc",
            LandmarkType::Sr => "Sr",
            LandmarkType::Fc => "Fc",
            LandmarkType::Fr => "Fr",
            LandmarkType::Nc => "Nc",
            LandmarkType::Nr => "Nr",
            LandmarkType::V => "V",
            LandmarkType::G => "G",
        }
    }
}

impl fmt::Display for LandmarkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandmarkType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LandmarkType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown landmark type `{s}`")))
    }
}

/// A landmark event. `source` is the phone it was derived from; landmarks read
/// back from a landmark file carry no source.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub time: f64,
    pub kind: LandmarkType,
    pub source: Option<PhoneSegment>,
}

impl Landmark {
    pub fn new(time: f64, kind: LandmarkType) -> Self {
        Self {
            time,
            kind,
            source: None,
        }
    }
}

/// Derives landmarks from phone segments.
///
/// Stop releases get `Sr` at their start and stop closures `Sc` at their
/// start. Fricatives and affricates get `Fc`/`Fr` at start/end, nasals
/// `Nc`/`Nr`. Vowels and glides get one landmark at the midpoint. Other
/// phones produce nothing. The result is sorted by time and does not depend
/// on the input order.
pub fn derive_landmarks(segments: &[PhoneSegment], map: &PhoneClassMap) -> Result<Vec<Landmark>> {
    let mut sorted: Vec<&PhoneSegment> = segments.iter().collect();
    sorted.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then(a.end.total_cmp(&b.end))
            .then_with(|| a.label.cmp(&b.label))
    });

    let mut out = Vec::with_capacity(segments.len() * 2);
    for seg in sorted {
        let class = map.lookup(&seg.label)?;
        let mut push = |time: f64, kind| {
            out.push(Landmark {
                time,
                kind,
                source: Some(seg.clone()),
            })
        };
        match class.manner {
            Manner::StopRelease => push(seg.start, LandmarkType::Sr),
            Manner::StopClosure => push(seg.start, LandmarkType::Sc),
            Manner::Fricative | Manner::Affricate => {
                push(seg.start, LandmarkType::Fc);
                push(seg.end, LandmarkType::Fr);
            }
            Manner::Nasal => {
                push(seg.start, LandmarkType::Nc);
                push(seg.end, LandmarkType::Nr);
            }
            Manner::Vowel => push(seg.midpoint(), LandmarkType::V),
            Manner::Glide => push(seg.midpoint(), LandmarkType::G),
            Manner::Other => {}
        }
    }
    // stable: simultaneous landmarks keep segment order
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

/// Voicing label of an obstruent segment.
pub fn label_voicing(segment: &PhoneSegment, map: &PhoneClassMap) -> Result<Label> {
    let class = map.lookup(&segment.label)?;
    match class.voicing {
        Voicing::Voiced => Ok(Label::Voiced),
        Voicing::Unvoiced => Ok(Label::Unvoiced),
        Voicing::NotApplicable => Err(Error::invalid(format!(
            "`{}` is a {}, not an obstruent",
            segment.label, class.manner
        ))),
    }
}

/// Renders landmarks as `<time_s>\t<type>` lines, time to four decimals.
pub fn write_landmark_file(landmarks: &[Landmark]) -> String {
    landmarks
        .iter()
        .map(|l| format!("{:.4}\t{}\n", l.time, l.kind))
        .collect()
}

pub fn read_landmark_file(text: &str) -> Result<Vec<Landmark>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: idx + 1, msg };
        let mut fields = line.split_whitespace();
        let (Some(time), Some(kind), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected `time type`, got `{line}`")));
        };
        let time: f64 = time
            .parse()
            .map_err(|e| parse_err(format!("bad time `{time}`: {e}")))?;
        let kind: LandmarkType = kind.parse().map_err(|e: Error| parse_err(e.to_string()))?;
        out.push(Landmark::new(time, kind));
    }
    Ok(out)
}
