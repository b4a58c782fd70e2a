use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One time-aligned phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneSegment {
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub utterance_id: String,
}

impl PhoneSegment {
    pub fn new(
        label: impl Into<String>,
        start: f64,
        end: f64,
        utterance_id: impl Into<String>,
    ) -> Self {
        Self {
            label: label.into(),
            start,
            end,
            utterance_id: utterance_id.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// Parses a `.phn`-style alignment: one `<start_sample> <end_sample> <phone>` per line.
///
/// Blank lines are ignored. Segments come back sorted by start; overlapping,
/// reversed and zero-length intervals are rejected.
pub fn parse_alignment(
    text: &str,
    sample_rate: u32,
    utterance_id: &str,
) -> Result<Vec<PhoneSegment>> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let sr = f64::from(sample_rate);
    let mut rows: Vec<(u64, u64, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [start, end, phone] = fields[..] else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `start end phone`, got `{line}`"),
            });
        };
        let parse_idx = |s: &str| {
            s.parse::<u64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad sample index `{s}`: {e}"),
            })
        };
        let (start, end) = (parse_idx(start)?, parse_idx(end)?);
        if end <= start {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("segment `{phone}` has end {end} <= start {start}"),
            });
        }
        rows.push((start, end, phone.to_string(), line_no));
    }
    rows.sort_by_key(|r| (r.0, r.1));
    for pair in rows.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.0 < prev.1 {
            return Err(Error::Structure(format!(
                "{utterance_id}: segment `{}` (line {}) overlaps `{}` (line {})",
                next.2, next.3, prev.2, prev.3
            )));
        }
    }
    Ok(rows
        .into_iter()
        .map(|(s, e, phone, _)| {
            PhoneSegment::new(phone, s as f64 / sr, e as f64 / sr, utterance_id)
        })
        .collect())
}

/// Writes segments back in the sample-index alignment format.
pub fn write_alignment(segments: &[PhoneSegment], sample_rate: u32) -> String {
    let sr = f64::from(sample_rate);
    segments
        .iter()
        .map(|s| {
            format!(
                "{} {} {}\n",
                (s.start * sr).round() as u64,
                (s.end * sr).round() as u64,
                s.label
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sample_indices_as_seconds() {
        let segs = parse_alignment("0 1600 sil\n1600 3065 s\n", 16_000, "u1").unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].label, "sil");
        assert_eq!((segs[0].start, segs[0].end), (0.0, 0.1));
        assert_eq!(segs[1].start, 0.1);
        assert!((segs[1].end - 0.1916).abs() < 1e-4);
        assert_eq!(segs[1].end, 3065.0 / 16_000.0);
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_alignment("", 16_000, "u").unwrap().is_empty());
        assert!(parse_alignment("\n\n", 16_000, "u").unwrap().is_empty());
    }

    #[test]
    fn zero_length_segment_is_rejected() {
        let err = parse_alignment("1600 1600 s", 16_000, "u").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_alignment("0 10 a\n10 x b\n", 16_000, "u").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_alignment("0 10 a\n10 20\n", 16_000, "u").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn overlap_is_structural_error() {
        let err = parse_alignment("0 100 a\n50 150 b\n", 16_000, "u").unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "{err}");
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let segs = parse_alignment("100 200 b\n0 100 a\n", 16_000, "u").unwrap();
        assert_eq!(segs[0].label, "a");
        assert_eq!(segs[1].label, "b");
    }

    #[test]
    fn zero_sample_rate_rejected() {
        assert!(parse_alignment("0 1 a", 0, "u").is_err());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let text = "0 1600 sil\n1600 3065 s\n3065 4500 aa\n";
        let segs = parse_alignment(text, 16_000, "u").unwrap();
        assert_eq!(write_alignment(&segs, 16_000), text);
    }
}
