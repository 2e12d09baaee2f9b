//! Aspect-level sentiment classifiers.
//!
//! Three architectures share one interface: a word matrix (`n × d_in`) and an
//! aspect span go in, three polarity logits come out. The input width is `d`
//! for plain models and `d + D_T` when transfer or noise columns are appended
//! by [`build_input`]; nothing else in the model changes.

mod input;
mod majority;
mod multitask;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ae::AspectSpan;
use crate::data::Domain;
use crate::error::{Error, Result};
use crate::layers::{
    additive_attention, classify, max_pool_rows, run_lstm, AttentionParams, ClassifierHead, Direction,
    LstmCellParams,
};
use crate::numerics::{softmax, Graph, ParamStore, Tensor, Var};

pub use input::{aspect_mean, build_input, noise_rows, InputKind, InputMode, TransferCache};
pub use majority::majority_predict;
pub use multitask::{MultitaskModel, MultitaskOutput};

/// Sentiment label; the discriminant is the class index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive = 0,
    Negative = 1,
    Neutral = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Polarity::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlsaSample {
    pub sentence_id: String,
    pub token_ids: Vec<usize>,
    pub span: AspectSpan,
    pub label: Polarity,
    pub domain: Option<Domain>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    TcLstm,
    Atae,
    Ian,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::TcLstm, Architecture::Atae, Architecture::Ian];

    pub fn has_attention(self) -> bool {
        !matches!(self, Architecture::TcLstm)
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "tclstm" => Ok(Architecture::TcLstm),
            "atae" => Ok(Architecture::Atae),
            "ian" => Ok(Architecture::Ian),
            _ => Err(Error::Config(format!("unknown architecture `{}`", s))),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::TcLstm => "tclstm",
            Architecture::Atae => "atae",
            Architecture::Ian => "ian",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlsaConfig {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub hidden: usize,
    /// Defaults to the attention key width.
    pub attn_dim: Option<usize>,
}

impl AlsaConfig {
    pub fn new(architecture: Architecture, input_dim: usize) -> Self {
        AlsaConfig {
            architecture,
            input_dim,
            hidden: 128,
            attn_dim: None,
        }
    }
}

#[derive(Clone, Debug)]
enum Layers {
    TcLstm {
        left: LstmCellParams,
        right: LstmCellParams,
    },
    Atae {
        lstm: LstmCellParams,
        attention: AttentionParams,
    },
    Ian {
        lstm_aspect: LstmCellParams,
        lstm_sentence: LstmCellParams,
        attn_aspect: AttentionParams,
        attn_sentence: AttentionParams,
    },
}

#[derive(Clone, Debug)]
pub struct AlsaModel {
    pub config: AlsaConfig,
    layers: Layers,
    head: ClassifierHead,
}

/// Graph handles produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct AlsaOutput {
    pub logits: Var,
    /// Attention over the sentence (ATAE, IAN).
    pub alpha: Option<Var>,
    /// Attention over the aspect words (IAN).
    pub alpha_aspect: Option<Var>,
}

/// Plain-valued prediction for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub label: Polarity,
    pub alpha: Option<Vec<f64>>,
    pub alpha_aspect: Option<Vec<f64>>,
}

impl AlsaModel {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, config: AlsaConfig, rng: &mut R) -> Result<Self> {
        let (d, h) = (config.input_dim, config.hidden);
        if d == 0 || h == 0 {
            return Err(Error::Config(format!("input_dim {} / hidden {}", d, h)));
        }
        let attn = config.attn_dim;
        let (layers, head_dim) = match config.architecture {
            Architecture::TcLstm => (
                Layers::TcLstm {
                    left: LstmCellParams::new(store, &format!("{prefix}.lstm_left"), 2 * d, h, rng)?,
                    right: LstmCellParams::new(store, &format!("{prefix}.lstm_right"), 2 * d, h, rng)?,
                },
                2 * h,
            ),
            Architecture::Atae => (
                Layers::Atae {
                    lstm: LstmCellParams::new(store, &format!("{prefix}.lstm"), 2 * d, h, rng)?,
                    attention: AttentionParams::new(
                        store,
                        &format!("{prefix}.attention"),
                        h,
                        d,
                        attn.unwrap_or(h),
                        rng,
                    )?,
                },
                h,
            ),
            Architecture::Ian => (
                Layers::Ian {
                    lstm_aspect: LstmCellParams::new(store, &format!("{prefix}.lstm_aspect"), d, h, rng)?,
                    lstm_sentence: LstmCellParams::new(store, &format!("{prefix}.lstm_sentence"), d, h, rng)?,
                    attn_aspect: AttentionParams::new(
                        store,
                        &format!("{prefix}.attn_aspect"),
                        h,
                        h,
                        attn.unwrap_or(h),
                        rng,
                    )?,
                    attn_sentence: AttentionParams::new(
                        store,
                        &format!("{prefix}.attn_sentence"),
                        h,
                        h,
                        attn.unwrap_or(h),
                        rng,
                    )?,
                },
                2 * h,
            ),
        };
        let head = ClassifierHead::new(store, &format!("{prefix}.classifier"), head_dim, rng)?;
        Ok(AlsaModel { config, layers, head })
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    /// The attention parameters over the sentence, for inspection and tests.
    pub fn sentence_attention(&self) -> Option<&AttentionParams> {
        match &self.layers {
            Layers::TcLstm { .. } => None,
            Layers::Atae { attention, .. } => Some(attention),
            Layers::Ian { attn_sentence, .. } => Some(attn_sentence),
        }
    }

    pub fn aspect_attention(&self) -> Option<&AttentionParams> {
        match &self.layers {
            Layers::Ian { attn_aspect, .. } => Some(attn_aspect),
            _ => None,
        }
    }

    /// `words` is an `n × input_dim` matrix node.
    pub fn forward(&self, g: &mut Graph<'_>, words: Var, span: AspectSpan) -> Result<AlsaOutput> {
        let wt = g.value(words);
        if wt.rank() != 2 || wt.cols() != self.config.input_dim {
            return Err(Error::shape(
                "alsa_forward",
                format!("words {:?}, model input width {}", wt.shape(), self.config.input_dim),
            ));
        }
        span.check_within(wt.rows())?;
        let rows = g.rows(words)?;
        let aspect_rows = &rows[span.start..=span.end];
        match &self.layers {
            Layers::TcLstm { left, right } => {
                let a = mean_of(g, aspect_rows)?;
                let with_aspect = |g: &mut Graph<'_>, rs: &[Var]| -> Result<Vec<Var>> {
                    rs.iter().map(|&r| g.concat(&[r, a])).collect()
                };
                let left_in = with_aspect(g, &rows[..span.start])?;
                let right_in = with_aspect(g, &rows[span.end + 1..])?;
                let l = run_lstm(g, &left_in, left, Direction::Forward)?;
                let r = run_lstm(g, &right_in, right, Direction::Backward)?;
                let feat = g.concat(&[l.last, r.last])?;
                let logits = classify(g, feat, &self.head)?;
                Ok(AlsaOutput {
                    logits,
                    alpha: None,
                    alpha_aspect: None,
                })
            }
            Layers::Atae { lstm, attention } => {
                let a = mean_of(g, aspect_rows)?;
                let inputs = rows
                    .iter()
                    .map(|&r| g.concat(&[r, a]))
                    .collect::<Result<Vec<_>>>()?;
                let hs = run_lstm(g, &inputs, lstm, Direction::Forward)?;
                let att = additive_attention(g, &hs.states, a, attention)?;
                let logits = classify(g, att.pooled, &self.head)?;
                Ok(AlsaOutput {
                    logits,
                    alpha: Some(att.alpha),
                    alpha_aspect: None,
                })
            }
            Layers::Ian {
                lstm_aspect,
                lstm_sentence,
                attn_aspect,
                attn_sentence,
            } => {
                let ha = run_lstm(g, aspect_rows, lstm_aspect, Direction::Forward)?;
                let hs = run_lstm(g, &rows, lstm_sentence, Direction::Forward)?;
                let ha_m = g.stack_rows(&ha.states)?;
                let hs_m = g.stack_rows(&hs.states)?;
                let pooled_a = max_pool_rows(g, ha_m)?;
                let pooled_s = max_pool_rows(g, hs_m)?;
                let aspect_rep = additive_attention(g, &ha.states, pooled_s, attn_aspect)?;
                let sentence_rep = additive_attention(g, &hs.states, pooled_a, attn_sentence)?;
                let feat = g.concat(&[aspect_rep.pooled, sentence_rep.pooled])?;
                let logits = classify(g, feat, &self.head)?;
                Ok(AlsaOutput {
                    logits,
                    alpha: Some(sentence_rep.alpha),
                    alpha_aspect: Some(aspect_rep.alpha),
                })
            }
        }
    }

    /// Categorical cross-entropy of the gold label.
    pub fn loss(&self, g: &mut Graph<'_>, words: Var, span: AspectSpan, label: Polarity) -> Result<Var> {
        let out = self.forward(g, words, span)?;
        g.softmax_cross_entropy(out.logits, label.index())
    }

    pub fn predict(&self, store: &ParamStore, words: &Tensor, span: AspectSpan) -> Result<Prediction> {
        let mut g = Graph::new(store);
        let w = g.input(words.clone());
        let out = self.forward(&mut g, w, span)?;
        Ok(prediction_from(&g, &out))
    }
}

pub(crate) fn prediction_from(g: &Graph<'_>, out: &AlsaOutput) -> Prediction {
    let logits = g.value(out.logits).data().to_vec();
    let probabilities = softmax(&logits);
    let best = argmax(&logits);
    Prediction {
        label: Polarity::ALL[best],
        probabilities,
        logits,
        alpha: out.alpha.map(|a| g.value(a).data().to_vec()),
        alpha_aspect: out.alpha_aspect.map(|a| g.value(a).data().to_vec()),
    }
}

/// First index of the maximum.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn mean_of(g: &mut Graph<'_>, rows: &[Var]) -> Result<Var> {
    let m = g.stack_rows(rows)?;
    g.mean_rows(m)
}
