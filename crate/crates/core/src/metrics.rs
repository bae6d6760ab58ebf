//! Confusion matrices, per-event scores and micro-pooled overall scores.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::sim::{FailureLabel, LabelRow};

pub const EVENT_NAMES: [&str; 3] = ["step", "obstacle", "tilt"];
pub const PREDICTIONS_HEADER: &str = "map_id,traj_id,p_step,p_obstacle,p_tilt";
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    /// Builds a matrix from the conventional layout: rows are the true class
    /// (safe, fail), columns the predicted class (safe, fail).
    pub fn from_rows(true_safe: [u64; 2], true_fail: [u64; 2]) -> Self {
        Self { tn: true_safe[0], fp: true_safe[1], fn_: true_fail[0], tp: true_fail[1] }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, label: bool, pred: bool) {
        match (label, pred) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { tp: self.tp + o.tp, fp: self.fp + o.fp, tn: self.tn + o.tn, fn_: self.fn_ + o.fn_ }
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Rates for one event. `None` marks a rate that has no meaning for the
/// given counts and is printed as `-`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EventScores {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

impl EventScores {
    pub fn as_array(&self) -> [Option<f64>; 4] {
        [self.accuracy, self.recall, self.precision, self.f1]
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion(labels: &[bool], preds: &[bool]) -> Result<ConfusionMatrix> {
    if labels.len() != preds.len() {
        return Err(Error::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (&l, &p) in labels.iter().zip(preds) {
        cm.add(l, p);
    }
    Ok(cm)
}

/// With no true failures at all, recall, precision and F1 are all reported
/// as undefined: there is nothing the event could be scored against.
pub fn scores(cm: &ConfusionMatrix) -> EventScores {
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    let positives = cm.tp + cm.fn_;
    if positives == 0 {
        return EventScores { accuracy, ..Default::default() };
    }
    let recall = ratio(cm.tp, positives);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_);
    EventScores { accuracy, recall, precision, f1 }
}

/// Micro-pooled scores: the matrices are summed before any rate is taken.
pub fn overall(cms: &[ConfusionMatrix]) -> EventScores {
    scores(&cms.iter().copied().sum())
}

/// Per-event predicted failure probabilities for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub map_id: u32,
    pub traj_id: u32,
    pub p: [f64; 3],
}

impl PredictionRow {
    pub fn binarize(&self, threshold: f64) -> FailureLabel {
        FailureLabel::from_array(self.p.map(|p| p >= threshold))
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} {s:?}")))
}

pub fn read_predictions_csv<R: BufRead>(input: R) -> Result<Vec<PredictionRow>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != PREDICTIONS_HEADER {
        return Err(Error::Parse(format!("expected header {PREDICTIONS_HEADER:?}, got {:?}", header.trim())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Parse(format!("line {n}: expected 5 fields, got {}", f.len())));
        }
        let mut p = [0.0; 3];
        for (k, slot) in p.iter_mut().enumerate() {
            let v: f64 = parse_field(f[2 + k], n, "probability")?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parse(format!("line {n}: probability {v} outside [0, 1]")));
            }
            *slot = v;
        }
        rows.push(PredictionRow { map_id: parse_field(f[0], n, "map_id")?, traj_id: parse_field(f[1], n, "traj_id")?, p });
    }
    Ok(rows)
}

pub fn write_predictions_csv<W: std::io::Write>(mut out: W, rows: &[PredictionRow]) -> Result<()> {
    writeln!(out, "{PREDICTIONS_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.map_id, r.traj_id, r.p[0], r.p[1], r.p[2])?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub threshold: f64,
    pub samples: u64,
    pub matrices: [ConfusionMatrix; 3],
    pub events: [EventScores; 3],
    pub overall: EventScores,
}

impl EvaluationReport {
    pub fn from_matrices(matrices: [ConfusionMatrix; 3], threshold: f64) -> Self {
        Self {
            threshold,
            samples: matrices[0].total(),
            events: matrices.map(|m| scores(&m)),
            overall: overall(&matrices),
            matrices,
        }
    }

    fn rows(&self) -> impl Iterator<Item = (&'static str, &EventScores)> {
        EVENT_NAMES.iter().copied().zip(self.events.iter()).chain(std::iter::once(("overall", &self.overall)))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples: {}", self.samples);
        let _ = writeln!(s, "threshold: {}", self.threshold);
        let _ = writeln!(s, "\nconfusion (tp fp tn fn)");
        for (name, m) in EVENT_NAMES.iter().zip(&self.matrices) {
            let _ = writeln!(s, "{name:<9} {} {} {} {}", m.tp, m.fp, m.tn, m.fn_);
        }
        let _ = writeln!(s, "\n{:<9} {:>8} {:>8} {:>8} {:>8}", "event", "accuracy", "recall", "precision", "f1");
        for (name, sc) in self.rows() {
            let [a, r, p, f] = sc.as_array().map(fmt_rate);
            let _ = writeln!(s, "{name:<9} {a:>8} {r:>8} {p:>8} {f:>8}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("event,accuracy,recall,precision,f1\n");
        for (name, sc) in self.rows() {
            let [a, r, p, f] = sc.as_array().map(fmt_rate);
            let _ = writeln!(s, "{name},{a},{r},{p},{f}");
        }
        s
    }
}

/// Three decimals, or `-` for an undefined rate.
pub fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

/// Joins predictions to labels on `(map_id, traj_id)`. Both files must cover
/// exactly the same keys, each once.
pub fn evaluate(preds: &[PredictionRow], labels: &[LabelRow], threshold: f64) -> Result<EvaluationReport> {
    let mut by_key = BTreeMap::new();
    for l in labels {
        if by_key.insert((l.map_id, l.traj_id), l.label).is_some() {
            return Err(Error::DataMismatch(format!("duplicate label key ({}, {})", l.map_id, l.traj_id)));
        }
    }
    if preds.len() != labels.len() {
        return Err(Error::DataMismatch(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let mut matrices = [ConfusionMatrix::default(); 3];
    for p in preds {
        let Some(label) = by_key.remove(&(p.map_id, p.traj_id)) else {
            return Err(Error::DataMismatch(format!("prediction ({}, {}) has no unique label", p.map_id, p.traj_id)));
        };
        let truth = label.as_array();
        let guess = p.binarize(threshold).as_array();
        for e in 0..3 {
            matrices[e].add(truth[e], guess[e]);
        }
    }
    Ok(EvaluationReport::from_matrices(matrices, threshold))
}
