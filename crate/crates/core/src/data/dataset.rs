use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{align_bio, overlapping_span, tokenize, Domain, RawPolarity, RawSentence, Token, Vocabulary};
use crate::ae::AspectSpan;
use crate::alsa::{AlsaSample, Polarity};
use crate::crf::BioSequence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedAspect {
    pub term: String,
    pub span: AspectSpan,
    pub polarity: RawPolarity,
}

/// One cache record: a tokenized sentence with its tags and aspects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedSentence {
    pub id: String,
    pub domain: Domain,
    pub text: String,
    pub tokens: Vec<Token>,
    /// `None` when the aspects could not be tagged (overlapping annotations).
    pub tags: Option<BioSequence>,
    pub aspects: Vec<ProcessedAspect>,
}

impl ProcessedSentence {
    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Aspect spans with a sentiment class; conflict aspects are left out.
    pub fn labelled_aspects(&self) -> impl Iterator<Item = (AspectSpan, Polarity)> + '_ {
        self.aspects
            .iter()
            .filter_map(|a| a.polarity.label().map(|l| (a.span, l)))
    }
}

pub fn process_sentence(raw: &RawSentence, domain: Domain) -> Result<ProcessedSentence> {
    let tokens = tokenize(&raw.text).map_err(|e| Error::InvalidArgument(format!("sentence `{}`: {}", raw.id, e)))?;
    let aspects = raw
        .aspects
        .iter()
        .map(|a| {
            Ok(ProcessedAspect {
                term: a.term.clone(),
                span: overlapping_span(&tokens, a)
                    .map_err(|e| Error::Alignment(format!("sentence `{}`: {}", raw.id, e)))?,
                polarity: a.polarity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tags = match align_bio(&tokens, &raw.aspects) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("sentence `{}` left out of tagging: {}", raw.id, e);
            None
        }
    };
    Ok(ProcessedSentence {
        id: raw.id.clone(),
        domain,
        text: raw.text.clone(),
        tokens,
        tags,
        aspects,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub sentences: Vec<ProcessedSentence>,
}

/// Counts per class in positive, negative, neutral order.
pub type LabelCounts = [usize; 3];

impl Dataset {
    pub fn from_raw(raw: &[RawSentence], domain: Domain) -> Result<Self> {
        Ok(Dataset {
            sentences: raw.iter().map(|r| process_sentence(r, domain)).collect::<Result<_>>()?,
        })
    }

    pub fn from_xml_file(path: &Path, domain: Domain) -> Result<Self> {
        let xml = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_raw(&super::parse_semeval(&xml)?, domain)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Every distinct token, in first-seen order.
    pub fn token_types(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for s in &self.sentences {
            for t in &s.tokens {
                if seen.insert(t.text.as_str()) {
                    out.push(t.text.clone());
                }
            }
        }
        out
    }

    /// One sample per non-conflict aspect, in document order.
    pub fn alsa_samples(&self, vocab: &Vocabulary) -> Vec<AlsaSample> {
        let mut out = Vec::new();
        for s in &self.sentences {
            let ids = vocab.ids(&s.token_texts());
            for (span, label) in s.labelled_aspects() {
                out.push(AlsaSample {
                    sentence_id: s.id.clone(),
                    token_ids: ids.clone(),
                    span,
                    label,
                    domain: Some(s.domain),
                });
            }
        }
        out
    }

    /// Sentences usable for tagging: `(id, token ids, tags)`.
    pub fn ae_examples(&self, vocab: &Vocabulary) -> Vec<(String, Vec<usize>, BioSequence)> {
        self.sentences
            .iter()
            .filter_map(|s| {
                s.tags
                    .as_ref()
                    .map(|t| (s.id.clone(), vocab.ids(&s.token_texts()), t.clone()))
            })
            .collect()
    }

    pub fn label_counts(&self) -> LabelCounts {
        let mut c = [0; 3];
        for s in &self.sentences {
            for (_, l) in s.labelled_aspects() {
                c[l.index()] += 1;
            }
        }
        c
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for s in &self.sentences {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut sentences = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                sentences.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Dataset { sentences })
    }
}

/// A sample is multi-aspect when another sample shares its sentence id.
pub fn multi_aspect_mask(samples: &[AlsaSample]) -> Vec<bool> {
    let mut per_sentence: HashMap<&str, usize> = HashMap::new();
    for s in samples {
        *per_sentence.entry(s.sentence_id.as_str()).or_default() += 1;
    }
    samples
        .iter()
        .map(|s| per_sentence[s.sentence_id.as_str()] > 1)
        .collect()
}

/// `(single-aspect, multi-aspect)` samples, order preserved.
pub fn split_sa_ma(samples: &[AlsaSample]) -> (Vec<AlsaSample>, Vec<AlsaSample>) {
    let mask = multi_aspect_mask(samples);
    let (mut sa, mut ma) = (Vec::new(), Vec::new());
    for (s, m) in samples.iter().zip(mask) {
        if m {
            ma.push(s.clone());
        } else {
            sa.push(s.clone());
        }
    }
    (sa, ma)
}
