//! Classification metrics and cross-corpus comparison reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with voiced as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predictions: &[Label], truth: &[Label]) -> Result<Self> {
        if predictions.len() != truth.len() || truth.is_empty() {
            return Err(Error::invalid(format!(
                "{} predictions for {} labels",
                predictions.len(),
                truth.len()
            )));
        }
        let mut m = Self::default();
        for (p, t) in predictions.iter().zip(truth) {
            match (p.is_voiced(), t.is_voiced()) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, true) => m.fn_ += 1,
                (false, false) => m.tn += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `2tp / (2tp + fp + fn)`, 0 when undefined.
    pub fn f1_voiced(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy()
    }
}

/// `(err_other / err_ref - 1) * 100`; `None` when the reference error is zero.
pub fn relative_error_increment(err_ref: f64, err_other: f64) -> Option<f64> {
    (err_ref > 0.0).then(|| (err_other / err_ref - 1.0) * 100.0)
}

/// Metrics of one model on one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub corpus_id: String,
    pub variant: String,
    pub model: String,
    pub confusion: ConfusionMatrix,
    pub f1: f64,
    pub accuracy: f64,
    pub error_rate: f64,
}

impl EvalReport {
    pub fn new(corpus_id: &str, variant: &str, model: &str, confusion: ConfusionMatrix) -> Self {
        Self {
            corpus_id: corpus_id.to_string(),
            variant: variant.to_string(),
            model: model.to_string(),
            f1: confusion.f1_voiced(),
            accuracy: confusion.accuracy(),
            error_rate: confusion.error_rate(),
            confusion,
        }
    }

    pub fn from_predictions(
        corpus_id: &str,
        variant: &str,
        model: &str,
        predictions: &[Label],
        truth: &[Label],
    ) -> Result<Self> {
        Ok(Self::new(
            corpus_id,
            variant,
            model,
            ConfusionMatrix::from_predictions(predictions, truth)?,
        ))
    }
}

/// A reference-corpus report and the degradation on every other corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLingualReport {
    pub reference: EvalReport,
    pub others: Vec<EvalReport>,
    /// Percent increments aligned with `others`.
    pub increments: Vec<Option<f64>>,
}

impl CrossLingualReport {
    pub fn new(reference: EvalReport, others: Vec<EvalReport>) -> Result<Self> {
        if let Some(o) = others
            .iter()
            .find(|o| o.variant != reference.variant || o.model != reference.model)
        {
            return Err(Error::invalid(format!(
                "cannot compare {}/{} on {} with reference {}/{}",
                o.variant, o.model, o.corpus_id, reference.variant, reference.model
            )));
        }
        let increments = others
            .iter()
            .map(|o| relative_error_increment(reference.error_rate, o.error_rate))
            .collect();
        Ok(Self {
            reference,
            others,
            increments,
        })
    }

    pub fn increment_for(&self, corpus_id: &str) -> Option<f64> {
        self.others
            .iter()
            .position(|o| o.corpus_id == corpus_id)
            .and_then(|i| self.increments[i])
    }
}

pub const REPORT_CSV_HEADER: &str =
    "variant,model,corpus,tp,fp,fn,tn,f1,accuracy,error_rate,increment_pct";

fn csv_line(out: &mut String, r: &EvalReport, increment: Option<f64>) {
    let c = &r.confusion;
    let inc = increment.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{}",
        r.variant,
        r.model,
        r.corpus_id,
        c.tp,
        c.fp,
        c.fn_,
        c.tn,
        r.f1,
        r.accuracy,
        r.error_rate,
        inc
    );
}

/// Report CSV rows for several cross-corpus reports. The reference row has an `NA` increment.
pub fn reports_to_csv(reports: &[CrossLingualReport]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for rep in reports {
        csv_line(&mut out, &rep.reference, None);
        for (o, inc) in rep.others.iter().zip(&rep.increments) {
            csv_line(&mut out, o, *inc);
        }
    }
    out
}

/// Parses report CSV rows back into [`CrossLingualReport`]s, grouping by
/// variant and model; the row with an `NA` increment is the reference.
pub fn reports_from_csv(text: &str) -> Result<Vec<CrossLingualReport>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == REPORT_CSV_HEADER => {}
        _ => return Err(Error::Format("report CSV header missing".into())),
    }
    let mut groups: Vec<(Option<EvalReport>, Vec<EvalReport>)> = Vec::new();
    let mut keys: Vec<(String, String)> = Vec::new();
    for (i, line) in lines {
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 11 {
            return Err(err(format!("expected 11 columns, found {}", cols.len())));
        }
        let count = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
        let confusion = ConfusionMatrix {
            tp: count(cols[3])?,
            fp: count(cols[4])?,
            fn_: count(cols[5])?,
            tn: count(cols[6])?,
        };
        let report = EvalReport::new(cols[2], cols[0], cols[1], confusion);
        let key = (cols[0].to_string(), cols[1].to_string());
        let g = match keys.iter().position(|k| *k == key) {
            Some(g) => g,
            None => {
                keys.push(key);
                groups.push((None, Vec::new()));
                groups.len() - 1
            }
        };
        if cols[10] == "NA" && groups[g].0.is_none() {
            groups[g].0 = Some(report);
        } else {
            groups[g].1.push(report);
        }
    }
    groups
        .into_iter()
        .zip(keys)
        .map(|((reference, others), (v, m))| {
            let reference =
                reference.ok_or_else(|| Error::Format(format!("no reference row for {v}/{m}")))?;
            CrossLingualReport::new(reference, others)
        })
        .collect()
}

/// Fixed-width table: one row per variant/model, F1 and accuracy on the
/// reference corpus, then the error increment on each other corpus.
pub fn render_increment_table(reports: &[CrossLingualReport]) -> String {
    let mut corpora: Vec<&str> = Vec::new();
    for rep in reports {
        for o in &rep.others {
            if !corpora.contains(&o.corpus_id.as_str()) {
                corpora.push(&o.corpus_id);
            }
        }
    }
    let mut out = format!("{:<14} {:<6} {:>8} {:>8}", "features", "model", "F1", "acc");
    for c in &corpora {
        let _ = write!(out, " {:>12}", format!("{c} (%)"));
    }
    out.push('\n');
    for rep in reports {
        let r = &rep.reference;
        let _ = write!(
            out,
            "{:<14} {:<6} {:>8.4} {:>8.4}",
            r.variant, r.model, r.f1, r.accuracy
        );
        for c in &corpora {
            let cell = rep
                .others
                .iter()
                .position(|o| o.corpus_id == *c)
                .map(|i| rep.increments[i].map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}")))
                .unwrap_or_else(|| "-".to_string());
            let _ = write!(out, " {cell:>12}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter()
            .map(|&b| {
                if b == 1 {
                    Label::Voiced
                } else {
                    Label::Unvoiced
                }
            })
            .collect()
    }

    #[test]
    fn hand_tally() {
        let truth = labels(&[1, 1, 1, 0, 0, 1, 0, 1, 0, 0]);
        let pred = labels(&[1, 0, 1, 0, 1, 1, 0, 0, 0, 1]);
        let m = ConfusionMatrix::from_predictions(&pred, &truth).unwrap();
        assert_eq!(
            m,
            ConfusionMatrix {
                tp: 3,
                fp: 2,
                fn_: 2,
                tn: 3
            }
        );
        assert!((m.f1_voiced() - 0.6).abs() < 1e-12);
        assert!((m.accuracy() - 0.6).abs() < 1e-12);
        assert!(ConfusionMatrix::from_predictions(&pred[..3], &truth).is_err());
    }

    #[test]
    fn perfect_and_inverted() {
        let truth = labels(&[1, 0, 1, 1]);
        let m = ConfusionMatrix::from_predictions(&truth, &truth).unwrap();
        assert_eq!((m.fp, m.fn_, m.f1_voiced(), m.accuracy()), (0, 0, 1.0, 1.0));
        let inv: Vec<Label> = truth.iter().map(|l| l.flipped()).collect();
        let m = ConfusionMatrix::from_predictions(&inv, &truth).unwrap();
        assert_eq!((m.tp, m.tn), (0, 0));
        assert_eq!(m.f1_voiced(), 0.0);
    }

    #[test]
    fn all_voiced_predictor_on_skewed_counts() {
        let m = ConfusionMatrix {
            tp: 13_179,
            fp: 4_722,
            fn_: 0,
            tn: 0,
        };
        assert!((m.accuracy() - 0.7362).abs() < 5e-5);
        assert!((m.f1_voiced() - 0.8481).abs() < 5e-5);
    }

    #[test]
    fn increments() {
        assert!((relative_error_increment(0.10, 0.1162).unwrap() - 16.2).abs() < 0.05);
        assert!((relative_error_increment(0.05, 0.0676).unwrap() - 35.2).abs() < 0.05);
        assert_eq!(relative_error_increment(0.1, 0.1), Some(0.0));
        assert_eq!(relative_error_increment(0.0, 0.1), None);
    }

    fn report(corpus: &str, acc_pct: u64, variant: &str) -> EvalReport {
        EvalReport::new(
            corpus,
            variant,
            "svm",
            ConfusionMatrix {
                tp: acc_pct,
                fp: 100 - acc_pct,
                fn_: 0,
                tn: 0,
            },
        )
    }

    #[test]
    fn cross_lingual() {
        let rep = CrossLingualReport::new(report("a", 95, "cues"), vec![report("b", 93, "cues")])
            .unwrap();
        assert!((rep.increment_for("b").unwrap() - 40.0).abs() < 1e-9);
        let single = CrossLingualReport::new(report("a", 95, "cues"), vec![]).unwrap();
        assert!(single.increments.is_empty());
        assert!(
            CrossLingualReport::new(report("a", 95, "cues"), vec![report("b", 93, "fb40")])
                .is_err()
        );
    }

    #[test]
    fn csv_round_trip_and_table_shape() {
        let variants = [
            "cues",
            "mc13_whole",
            "mc13_region",
            "mc39_whole",
            "mc39_region",
            "fb40",
        ];
        let reps: Vec<CrossLingualReport> = variants
            .iter()
            .map(|v| {
                CrossLingualReport::new(
                    report("a", 95, v),
                    vec![report("b", 90, v), report("c", 85, v)],
                )
                .unwrap()
            })
            .collect();
        let csv = reports_to_csv(&reps);
        assert_eq!(reports_from_csv(&csv).unwrap(), reps);
        let table = render_increment_table(&reps);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].contains("b (%)") && lines[0].contains("c (%)"));
        assert!(lines[1].contains("100.0") && lines[1].contains("200.0"));
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force(bits in prop::collection::vec((0u8..2, 0u8..2), 1..200)) {
            let pred = labels(&bits.iter().map(|b| b.0).collect::<Vec<_>>());
            let truth = labels(&bits.iter().map(|b| b.1).collect::<Vec<_>>());
            let rep = EvalReport::from_predictions("x", "cues", "svm", &pred, &truth).unwrap();
            let correct = bits.iter().filter(|b| b.0 == b.1).count() as f64;
            prop_assert!((rep.accuracy - correct / bits.len() as f64).abs() < 1e-12);
            let tp = bits.iter().filter(|b| b.0 == 1 && b.1 == 1).count() as f64;
            let pp = bits.iter().filter(|b| b.0 == 1).count() as f64;
            let ap = bits.iter().filter(|b| b.1 == 1).count() as f64;
            let f1 = if pp + ap == 0.0 { 0.0 } else { 2.0 * tp / (pp + ap) };
            prop_assert!((rep.f1 - f1).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&rep.f1) && (0.0..=1.0).contains(&rep.accuracy));
        }

        #[test]
        fn increment_scale_invariant_and_antisymmetric(r in 0.01f64..0.5, d in -0.009f64..0.5, k in 0.1f64..10.0) {
            let a = relative_error_increment(r, r + d).unwrap();
            let b = relative_error_increment(k * r, k * (r + d)).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            let e = d.abs().min(0.99 * r);
            let up = relative_error_increment(r, r + e).unwrap();
            let down = relative_error_increment(r, r - e).unwrap();
            prop_assert!((up + down).abs() < 1e-9);
        }
    }
}
