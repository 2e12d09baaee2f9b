use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{macro_f1_sliced, MetricsReport};
use super::model::{Model, ModelBundle};
use super::train::classifier_report;
use crate::ae::{export_transfer_many, AspectSpan};
use crate::alsa::{majority_predict, Architecture, AlsaSample, Polarity, TransferCache};
use crate::data::{multi_aspect_mask, Dataset};
use crate::error::{Error, Result};

/// Metrics of a classifier checkpoint on `dataset`; `expected` guards against
/// evaluating the wrong architecture.
pub fn evaluate(
    bundle: &ModelBundle,
    dataset: &Dataset,
    expected: Option<Architecture>,
    transfer: Option<&TransferCache>,
) -> Result<MetricsReport> {
    let model = bundle.alsa()?;
    if let Some(arch) = expected {
        if model.architecture() != arch {
            return Err(Error::ArchitectureMismatch {
                expected: arch.to_string(),
                found: bundle.describe(),
            });
        }
    }
    let samples = dataset.alsa_samples(&bundle.vocab);
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no labelled aspects to evaluate".into()));
    }
    classifier_report(bundle, &samples, transfer)
}

/// S_T for every sentence of `datasets`, keyed by sentence id.
pub fn export_st(ae: &ModelBundle, datasets: &[&Dataset]) -> Result<TransferCache> {
    let model = ae.ae()?;
    let mut cache = TransferCache::new();
    let mut seen = std::collections::HashMap::new();
    let mut work = Vec::new();
    for d in datasets {
        for s in &d.sentences {
            match seen.get(s.id.as_str()) {
                Some(text) if *text == s.text => continue,
                Some(_) => {
                    return Err(Error::InvalidArgument(format!(
                        "sentence id `{}` names two different sentences",
                        s.id
                    )))
                }
                None => {
                    seen.insert(s.id.clone(), s.text.clone());
                    work.push((s.id.clone(), ae.vocab.ids(&s.token_texts())));
                }
            }
        }
    }
    for (id, s_t) in export_transfer_many(model, &ae.store, &work)? {
        cache.insert(id, s_t)?;
    }
    Ok(cache)
}

/// One attention head's weights for one aspect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub sentence_id: String,
    pub span: AspectSpan,
    /// `sentence` or `aspect`.
    pub head: String,
    /// The attended tokens, aligned with `alpha`.
    pub tokens: Vec<String>,
    pub alpha: Vec<f64>,
    pub predicted: Polarity,
    pub gold: Polarity,
}

/// Attention records for every labelled aspect of `dataset`: one per head.
pub fn dump_attention(bundle: &ModelBundle, dataset: &Dataset, transfer: Option<&TransferCache>) -> Result<Vec<AttentionRecord>> {
    let arch = bundle.alsa()?.architecture();
    if !arch.has_attention() {
        return Err(Error::Unsupported(format!("no attention to dump: {} has no attention layer", arch)));
    }
    let samples = dataset.alsa_samples(&bundle.vocab);
    let preds = bundle.predict_alsa(&samples, transfer)?;
    let texts: std::collections::HashMap<&str, Vec<&str>> = dataset
        .sentences
        .iter()
        .map(|s| (s.id.as_str(), s.token_texts()))
        .collect();
    let mut out = Vec::new();
    for (s, p) in samples.iter().zip(preds) {
        let tokens = &texts[s.sentence_id.as_str()];
        let mut push = |head: &str, alpha: Vec<f64>, toks: &[&str]| {
            out.push(AttentionRecord {
                sentence_id: s.sentence_id.clone(),
                span: s.span,
                head: head.to_string(),
                tokens: toks.iter().map(|t| t.to_string()).collect(),
                alpha,
                predicted: p.label,
                gold: s.label,
            })
        };
        if let Some(a) = p.alpha {
            push("sentence", a, tokens);
        }
        if let Some(a) = p.alpha_aspect {
            push("aspect", a, &tokens[s.span.start..=s.span.end]);
        }
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn label_samples(dataset: &Dataset) -> Vec<AlsaSample> {
    dataset
        .sentences
        .iter()
        .flat_map(|s| {
            s.labelled_aspects().map(move |(span, label)| AlsaSample {
                sentence_id: s.id.clone(),
                token_ids: Vec::new(),
                span,
                label,
                domain: Some(s.domain),
            })
        })
        .collect()
}

/// Majority-label baseline: train labels pick the class, test labels are scored.
pub fn majority_report(train: &Dataset, test: &Dataset) -> Result<MetricsReport> {
    let train_labels: Vec<Polarity> = label_samples(train).iter().map(|s| s.label).collect();
    let test_samples = label_samples(test);
    let golds: Vec<Polarity> = test_samples.iter().map(|s| s.label).collect();
    let preds = majority_predict(&train_labels, golds.len())?;
    macro_f1_sliced(&preds, &golds, &multi_aspect_mask(&test_samples))
}

/// Closed-form majority macro F1 (percent) from per-class test counts and the chosen class.
pub fn majority_closed_form(test_counts: [usize; 3], majority: Polarity) -> f64 {
    let n: usize = test_counts.iter().sum();
    let c = test_counts[majority.index()] as f64;
    100.0 * 2.0 * c / (n as f64 + c) / 3.0
}

impl ModelBundle {
    /// True when this bundle holds a model with an attention layer.
    pub fn has_attention(&self) -> bool {
        match &self.model {
            Model::Ae(_) => false,
            Model::Multitask(_) => true,
            Model::Alsa { model, .. } => model.architecture().has_attention(),
        }
    }
}
