use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_ENGLISH: &str = include_str!("../../data/english.phonemap");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Manner {
    StopClosure,
    StopRelease,
    Fricative,
    Affricate,
    Nasal,
    Vowel,
    Glide,
    Other,
}

impl Manner {
    pub fn is_obstruent(self) -> bool {
        matches!(
            self,
            Manner::StopClosure | Manner::StopRelease | Manner::Fricative | Manner::Affricate
        )
    }

    fn as_str(self) -> &'static str {
        match self {
            Manner::StopClosure => "stop_closure",
            Manner::StopRelease => "stop_release",
            Manner::Fricative => "fricative",
            Manner::Affricate => "affricate",
            Manner::Nasal => "nasal",
            Manner::Vowel => "vowel",
            Manner::Glide => "glide",
            Manner::Other => "other",
        }
    }
}

impl FromStr for Manner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "stop_closure" => Manner::StopClosure,
            "stop_release" => Manner::StopRelease,
            "fricative" => Manner::Fricative,
            "affricate" => Manner::Affricate,
            "nasal" => Manner::Nasal,
            "vowel" => Manner::Vowel,
            "glide" => Manner::Glide,
            "other" => Manner::Other,
            _ => return Err(format!("unknown manner `{s}`")),
        })
    }
}

impl fmt::Display for Manner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Voicing as recorded in a phone map; `NotApplicable` for non-obstruents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Voicing {
    Voiced,
    Unvoiced,
    NotApplicable,
}

impl FromStr for Voicing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "voiced" => Ok(Voicing::Voiced),
            "unvoiced" => Ok(Voicing::Unvoiced),
            "na" | "n/a" => Ok(Voicing::NotApplicable),
            _ => Err(format!("unknown voicing `{s}`")),
        }
    }
}

impl fmt::Display for Voicing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Voicing::Voiced => "voiced",
            Voicing::Unvoiced => "unvoiced",
            Voicing::NotApplicable => "na",
        })
    }
}

/// Binary classification target. Voiced is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Voiced,
    Unvoiced,
}

impl Label {
    pub fn is_voiced(self) -> bool {
        self == Label::Voiced
    }

    /// +1 for voiced, -1 for unvoiced.
    pub fn sign(self) -> f64 {
        match self {
            Label::Voiced => 1.0,
            Label::Unvoiced => -1.0,
        }
    }

    /// 1.0 for voiced, 0.0 for unvoiced.
    pub fn target(self) -> f64 {
        match self {
            Label::Voiced => 1.0,
            Label::Unvoiced => 0.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Voiced => Label::Unvoiced,
            Label::Unvoiced => Label::Voiced,
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "voiced" => Ok(Label::Voiced),
            "unvoiced" => Ok(Label::Unvoiced),
            _ => Err(format!("unknown label `{s}`")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Voiced => "voiced",
            Label::Unvoiced => "unvoiced",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhoneClass {
    pub manner: Manner,
    pub voicing: Voicing,
}

/// Phone symbol to manner/voicing table.
///
/// The text form is one `phone manner voicing` triple per line; `#` starts a
/// comment when it opens a line (`h#` is a phone). Voicing must be `na` exactly when the manner is not an obstruent.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneClassMap {
    entries: BTreeMap<String, PhoneClass>,
}

impl PhoneClassMap {
    /// The bundled TIMIT English inventory.
    pub fn english() -> Self {
        Self::parse(DEFAULT_ENGLISH).expect("bundled phone map is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |msg: String| Error::Parse { line: line_no, msg };
            let [phone, manner, voicing] = fields[..] else {
                return Err(parse_err(format!(
                    "expected `phone manner voicing`, got {} fields",
                    fields.len()
                )));
            };
            let manner: Manner = manner.parse().map_err(parse_err)?;
            let voicing: Voicing = voicing.parse().map_err(parse_err)?;
            if manner.is_obstruent() == (voicing == Voicing::NotApplicable) {
                return Err(parse_err(format!(
                    "phone `{phone}`: voicing must be na exactly for non-obstruents"
                )));
            }
            if entries
                .insert(phone.to_string(), PhoneClass { manner, voicing })
                .is_some()
            {
                return Err(parse_err(format!("duplicate phone `{phone}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, phone: &str) -> Option<PhoneClass> {
        self.entries.get(phone).copied()
    }

    pub fn lookup(&self, phone: &str) -> Result<PhoneClass> {
        self.get(phone)
            .ok_or_else(|| Error::UnmappedPhone(phone.to_string()))
    }

    pub fn insert(&mut self, phone: &str, manner: Manner, voicing: Voicing) -> Result<()> {
        if manner.is_obstruent() == (voicing == Voicing::NotApplicable) {
            return Err(Error::invalid(format!(
                "phone `{phone}`: voicing must be na exactly for non-obstruents"
            )));
        }
        self.entries
            .insert(phone.to_string(), PhoneClass { manner, voicing });
        Ok(())
    }

    pub fn remove(&mut self, phone: &str) {
        self.entries.remove(phone);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(p, c)| format!("{p} {} {}\n", c.manner, c.voicing))
            .collect()
    }
}

impl Default for PhoneClassMap {
    fn default() -> Self {
        Self::english()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_map_covers_obstruents() {
        let map = PhoneClassMap::english();
        for p in [
            "b", "d", "g", "jh", "v", "dh", "z", "zh", "bcl", "dcl", "gcl",
        ] {
            assert_eq!(map.lookup(p).unwrap().voicing, Voicing::Voiced, "{p}");
        }
        for p in [
            "p", "t", "k", "ch", "f", "th", "s", "sh", "hh", "pcl", "tcl", "kcl",
        ] {
            assert_eq!(map.lookup(p).unwrap().voicing, Voicing::Unvoiced, "{p}");
        }
        assert_eq!(map.lookup("ch").unwrap().manner, Manner::Affricate);
        assert_eq!(map.lookup("aa").unwrap().manner, Manner::Vowel);
    }

    #[test]
    fn rejects_voicing_on_vowel() {
        let err = PhoneClassMap::parse("aa vowel voiced\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(PhoneClassMap::parse("s fricative na").is_err());
    }

    #[test]
    fn text_round_trip() {
        let map = PhoneClassMap::english();
        assert_eq!(PhoneClassMap::parse(&map.to_text()).unwrap(), map);
    }
}
