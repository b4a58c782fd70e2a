use std::fmt::Write as _;

use crate::corpus::{Label, LandmarkType};
use crate::error::{Error, Result};

use super::FeatureKind;

/// One feature vector with the landmark it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub utterance_id: String,
    pub landmark_time: f64,
    pub landmark_type: LandmarkType,
    pub label: Label,
    pub values: Vec<f64>,
}

/// Feature vectors of a single kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub kind: FeatureKind,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(kind: FeatureKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.kind.dims()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                actual: row.values.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows whose utterance id satisfies `keep`.
    pub fn filter_utterances(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            kind: self.kind,
            rows: self
                .rows
                .iter()
                .filter(|r| keep(&r.utterance_id))
                .cloned()
                .collect(),
        }
    }

    /// CSV with a `# kind=... dims=...` comment line, a header, and one row per landmark.
    /// Values are written with round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# kind={} dims={}\n", self.kind, self.dims());
        out.push_str("utterance_id,landmark_time,landmark_type,label");
        for i in 0..self.dims() {
            let _ = write!(out, ",f_{i}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{:?},{},{}",
                r.utterance_id,
                r.landmark_time,
                r.landmark_type,
                if r.label.is_voiced() {
                    "voiced"
                } else {
                    "unvoiced"
                }
            );
            for v in &r.values {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, meta) = lines
            .next()
            .ok_or_else(|| Error::Format("empty feature file".into()))?;
        let kind = meta
            .strip_prefix('#')
            .and_then(|m| m.split_whitespace().find_map(|kv| kv.strip_prefix("kind=")))
            .ok_or_else(|| Error::Format("feature file lacks a '# kind=' line".into()))?
            .parse::<FeatureKind>()?;
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("feature file lacks a header".into()))?;
        let expected_cols = 4 + kind.dims();
        if header.split(',').count() != expected_cols {
            return Err(Error::Dimension {
                expected: kind.dims(),
                actual: header.split(',').count().saturating_sub(4),
            });
        }
        let mut table = Self::new(kind);
        for (i, line) in lines {
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != expected_cols {
                return Err(parse_err(format!(
                    "expected {expected_cols} columns, found {}",
                    cols.len()
                )));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("{s:?}: {e}")))
            };
            let label = match cols[3] {
                "voiced" => Label::Voiced,
                "unvoiced" => Label::Unvoiced,
                other => return Err(parse_err(format!("unknown label {other:?}"))),
            };
            table.rows.push(FeatureRow {
                utterance_id: cols[0].to_string(),
                landmark_time: num(cols[1])?,
                landmark_type: cols[2]
                    .parse()
                    .map_err(|e: Error| parse_err(e.to_string()))?,
                label,
                values: cols[4..].iter().map(|s| num(s)).collect::<Result<_>>()?,
            });
        }
        Ok(table)
    }
}
