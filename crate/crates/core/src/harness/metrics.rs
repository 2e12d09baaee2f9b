use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::alsa::Polarity;
use crate::error::{Error, Result};

/// Classification scores; F1 values and accuracy are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub count: usize,
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 3]; 3],
    /// Positive, negative, neutral.
    pub per_class_f1: [f64; 3],
    pub macro_f1: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: Scores,
    /// Single-aspect samples; absent when not sliced or when the slice is empty.
    pub sa: Option<Scores>,
    pub ma: Option<Scores>,
}

/// Per-class F1 with zero for empty denominators; macro F1 is their plain mean.
pub fn scores(predictions: &[Polarity], golds: &[Polarity]) -> Result<Scores> {
    if predictions.len() != golds.len() {
        return Err(Error::shape(
            "macro_f1",
            format!("{} predictions for {} gold labels", predictions.len(), golds.len()),
        ));
    }
    if golds.is_empty() {
        return Err(Error::InvalidArgument("macro F1 over zero samples".into()));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (p, g) in predictions.iter().zip(golds) {
        confusion[g.index()][p.index()] += 1;
    }
    let mut per_class_f1 = [0.0; 3];
    for (c, f1) in per_class_f1.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
        let gold: usize = confusion[c].iter().sum();
        if predicted + gold > 0 {
            *f1 = 100.0 * 2.0 * tp as f64 / (predicted + gold) as f64;
        }
    }
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    Ok(Scores {
        count: golds.len(),
        confusion,
        macro_f1: per_class_f1.iter().sum::<f64>() / 3.0,
        per_class_f1,
        accuracy: 100.0 * correct as f64 / golds.len() as f64,
    })
}

pub fn macro_f1(predictions: &[Polarity], golds: &[Polarity]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        overall: scores(predictions, golds)?,
        sa: None,
        ma: None,
    })
}

/// Adds single- and multi-aspect slices; `multi_aspect[i]` marks sample `i`.
pub fn macro_f1_sliced(predictions: &[Polarity], golds: &[Polarity], multi_aspect: &[bool]) -> Result<MetricsReport> {
    let mut report = macro_f1(predictions, golds)?;
    if multi_aspect.len() != golds.len() {
        return Err(Error::shape(
            "macro_f1_sliced",
            format!("{} slice flags for {} samples", multi_aspect.len(), golds.len()),
        ));
    }
    let slice = |want: bool| -> Result<Option<Scores>> {
        let (p, g): (Vec<Polarity>, Vec<Polarity>) = predictions
            .iter()
            .zip(golds)
            .zip(multi_aspect)
            .filter(|(_, &m)| m == want)
            .map(|((&p, &g), _)| (p, g))
            .unzip();
        if g.is_empty() {
            Ok(None)
        } else {
            scores(&p, &g).map(Some)
        }
    };
    report.sa = slice(false)?;
    report.ma = slice(true)?;
    Ok(report)
}

impl MetricsReport {
    pub fn macro_f1(&self) -> f64 {
        self.overall.macro_f1
    }

    /// Plain-text table with two-decimal percentages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "slice", "n", "macro-F1", "pos-F1", "neg-F1", "neu-F1", "acc"
        );
        let mut row = |name: &str, s: &Scores| {
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
                name, s.count, s.macro_f1, s.per_class_f1[0], s.per_class_f1[1], s.per_class_f1[2], s.accuracy
            );
        };
        row("all", &self.overall);
        if let Some(s) = &self.sa {
            row("SA", s);
        }
        if let Some(s) = &self.ma {
            row("MA", s);
        }
        let _ = writeln!(out, "confusion (rows gold, columns predicted: pos neg neu)");
        for (p, r) in Polarity::ALL.iter().zip(&self.overall.confusion) {
            let _ = writeln!(out, "  {:<8} {:>6} {:>6} {:>6}", p.as_str(), r[0], r[1], r[2]);
        }
        out
    }
}
