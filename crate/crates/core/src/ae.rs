//! Aspect extraction: word embeddings → BiGRU → CRF.
//!
//! The BiGRU output doubles as the transfer representation handed to the
//! sentiment classifiers; its width is `2 × hidden` (64 with the default
//! hidden size of 32 per direction).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crf::{viterbi, BioSequence, CrfParams, Tag};
use crate::error::{Error, Result};
use crate::layers::{run_bigru, GruCellParams};
use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

/// Inclusive token span `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AspectSpan {
    pub start: usize,
    pub end: usize,
}

impl AspectSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidArgument(format!("span ({}, {})", start, end)));
        }
        Ok(AspectSpan { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        if self.start > self.end || self.end >= n {
            return Err(Error::OutOfRange {
                what: "aspect span end",
                index: self.end,
                size: n,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub embed_dim: usize,
    /// Per-direction GRU width; the transfer width is twice this.
    pub hidden: usize,
    pub fine_tune_embeddings: bool,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            embed_dim: 300,
            hidden: 32,
            fine_tune_embeddings: false,
        }
    }
}

impl AeConfig {
    pub fn transfer_dim(&self) -> usize {
        2 * self.hidden
    }
}

#[derive(Clone, Debug)]
pub struct AeModel {
    pub config: AeConfig,
    pub embedding: ParamId,
    pub gru_fwd: GruCellParams,
    pub gru_bwd: GruCellParams,
    pub crf: CrfParams,
}

impl AeModel {
    /// Registers all parameters under `prefix`. The embedding table is stored as
    /// `"{prefix}.embedding"` and is frozen unless fine-tuning is enabled.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        embeddings: Tensor,
        config: AeConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if embeddings.rank() != 2 || embeddings.cols() != config.embed_dim {
            return Err(Error::shape(
                "ae_model",
                format!(
                    "embedding table {:?}, embed_dim {}",
                    embeddings.shape(),
                    config.embed_dim
                ),
            ));
        }
        let embedding = store.add(format!("{prefix}.embedding"), embeddings)?;
        store.set_trainable(embedding, config.fine_tune_embeddings);
        let gru_fwd = GruCellParams::new(store, &format!("{prefix}.gru_fwd"), config.embed_dim, config.hidden, rng)?;
        let gru_bwd = GruCellParams::new(store, &format!("{prefix}.gru_bwd"), config.embed_dim, config.hidden, rng)?;
        let crf = CrfParams::new(store, &format!("{prefix}.crf"), config.transfer_dim(), rng)?;
        Ok(AeModel {
            config,
            embedding,
            gru_fwd,
            gru_bwd,
            crf,
        })
    }

    pub fn transfer_dim(&self) -> usize {
        self.config.transfer_dim()
    }

    /// Graph-level forward pass: `(emissions n×3, s_t n×D_T)`.
    pub fn encode(&self, g: &mut Graph<'_>, token_ids: &[usize]) -> Result<(Var, Var)> {
        if token_ids.is_empty() {
            return Err(Error::InvalidArgument("aspect extraction on an empty sentence".into()));
        }
        let words = g.embed(self.embedding, token_ids)?;
        let s_t = run_bigru(g, words, &self.gru_fwd, &self.gru_bwd)?;
        let emissions = self.crf.emissions(g, s_t)?;
        Ok((emissions, s_t))
    }

    pub fn loss(&self, g: &mut Graph<'_>, token_ids: &[usize], gold: &BioSequence) -> Result<Var> {
        if gold.len() != token_ids.len() {
            return Err(Error::shape(
                "ae_loss",
                format!("{} gold tags for {} tokens", gold.len(), token_ids.len()),
            ));
        }
        let (emissions, _) = self.encode(g, token_ids)?;
        self.crf.nll(g, emissions, gold)
    }
}

pub fn ae_forward(model: &AeModel, store: &ParamStore, token_ids: &[usize]) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new(store);
    let (em, s_t) = model.encode(&mut g, token_ids)?;
    Ok((g.value(em).clone(), g.value(s_t).clone()))
}

pub fn ae_loss(model: &AeModel, store: &ParamStore, token_ids: &[usize], gold: &BioSequence) -> Result<f64> {
    let mut g = Graph::new(store);
    let l = model.loss(&mut g, token_ids, gold)?;
    g.scalar(l)
}

/// Viterbi tags for one sentence.
pub fn ae_predict(model: &AeModel, store: &ParamStore, token_ids: &[usize]) -> Result<BioSequence> {
    let (em, _) = ae_forward(model, store, token_ids)?;
    viterbi(&em, &model.crf.scores(store))
}

/// Transfer representation of one sentence; the model is only read.
pub fn export_transfer(model: &AeModel, store: &ParamStore, token_ids: &[usize]) -> Result<Tensor> {
    ae_forward(model, store, token_ids).map(|(_, s_t)| s_t)
}

/// Exports many sentences in parallel, preserving input order.
pub fn export_transfer_many(
    model: &AeModel,
    store: &ParamStore,
    sentences: &[(String, Vec<usize>)],
) -> Result<Vec<(String, Tensor)>> {
    sentences
        .par_iter()
        .map(|(id, ids)| Ok((id.clone(), export_transfer(model, store, ids)?)))
        .collect()
}

/// Spans are maximal `B I*` runs; an `I` with no open span opens one.
pub fn decode_spans(tags: &BioSequence) -> Vec<AspectSpan> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.tags().iter().enumerate() {
        match t {
            Tag::B => {
                if let Some(s) = open {
                    spans.push(AspectSpan { start: s, end: i - 1 });
                }
                open = Some(i);
            }
            Tag::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            Tag::O => {
                if let Some(s) = open.take() {
                    spans.push(AspectSpan { start: s, end: i - 1 });
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(AspectSpan {
            start: s,
            end: tags.len() - 1,
        });
    }
    spans
}

/// `B` at each span start, `I` inside, `O` elsewhere. Spans must be disjoint.
pub fn encode_spans(spans: &[AspectSpan], n: usize) -> Result<BioSequence> {
    let mut tags = vec![Tag::O; n];
    for s in spans {
        s.check_within(n)?;
        for (i, t) in tags.iter_mut().enumerate().take(s.end + 1).skip(s.start) {
            if *t != Tag::O {
                return Err(Error::InvalidArgument(format!("overlapping spans at token {}", i)));
            }
            *t = if i == s.start { Tag::B } else { Tag::I };
        }
    }
    Ok(BioSequence(tags))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Exact-match span precision/recall/F1; zero denominators yield 0.
pub fn ae_span_f1(predicted: &[AspectSpan], gold: &[AspectSpan]) -> SpanScores {
    let hits = predicted.iter().filter(|p| gold.contains(p)).count();
    span_scores(hits, predicted.len(), gold.len())
}

pub fn span_scores(hits: usize, predicted: usize, gold: usize) -> SpanScores {
    let precision = if predicted == 0 { 0.0 } else { hits as f64 / predicted as f64 };
    let recall = if gold == 0 { 0.0 } else { hits as f64 / gold as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SpanScores { precision, recall, f1 }
}
