use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AlsaSample;
use crate::error::{Error, Result};
use crate::layers::embed;
use crate::numerics::checkpoint::{read_archive, write_archive};
use crate::numerics::{derive_seed, sample_standard_normal, Tensor};

/// Per-sentence transfer matrices keyed by sentence id.
#[derive(Clone, Debug, Default)]
pub struct TransferCache {
    entries: HashMap<String, Tensor>,
    width: Option<usize>,
}

impl TransferCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sentence_id: impl Into<String>, s_t: Tensor) -> Result<()> {
        if s_t.rank() != 2 {
            return Err(Error::shape("transfer_cache", format!("{:?}", s_t.shape())));
        }
        match self.width {
            Some(w) if w != s_t.cols() => {
                return Err(Error::shape(
                    "transfer_cache",
                    format!("width {} in a cache of width {}", s_t.cols(), w),
                ))
            }
            _ => self.width = Some(s_t.cols()),
        }
        self.entries.insert(sentence_id.into(), s_t);
        Ok(())
    }

    pub fn get(&self, sentence_id: &str) -> Result<&Tensor> {
        self.entries
            .get(sentence_id)
            .ok_or_else(|| Error::MissingTransfer(sentence_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Row width of the cached matrices, if any are present.
    pub fn width(&self) -> Option<usize> {
        self.width
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        write_archive(path, keys.into_iter().map(|k| (k.as_str(), &self.entries[k])))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cache = TransferCache::new();
        for (name, t) in read_archive(path)? {
            cache.insert(name, t)?;
        }
        Ok(cache)
    }
}

impl FromIterator<(String, Tensor)> for TransferCache {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        let mut c = TransferCache::new();
        for (k, v) in iter {
            c.insert(k, v).expect("consistent transfer widths");
        }
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Plain,
    Transfer,
    Noise,
}

impl std::str::FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(InputKind::Plain),
            "transfer" | "t" => Ok(InputKind::Transfer),
            "noise" | "r" => Ok(InputKind::Noise),
            _ => Err(Error::Config(format!("unknown input mode `{}`", s))),
        }
    }
}

impl std::fmt::Display for InputKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputKind::Plain => "plain",
            InputKind::Transfer => "transfer",
            InputKind::Noise => "noise",
        })
    }
}

/// Where the extra per-word columns come from.
#[derive(Clone, Copy, Debug)]
pub enum InputMode<'a> {
    Plain,
    Transfer(&'a TransferCache),
    /// Fixed N(0, 1) rows of width `dim`, one matrix per sentence derived from `seed` and the sentence id.
    Noise { dim: usize, seed: u64 },
}

impl InputMode<'_> {
    pub fn kind(&self) -> InputKind {
        match self {
            InputMode::Plain => InputKind::Plain,
            InputMode::Transfer(_) => InputKind::Transfer,
            InputMode::Noise { .. } => InputKind::Noise,
        }
    }

    /// Extra width appended to each word row, when known up front.
    pub fn extra_width(&self) -> Option<usize> {
        match self {
            InputMode::Plain => Some(0),
            InputMode::Transfer(c) => c.width(),
            InputMode::Noise { dim, .. } => Some(*dim),
        }
    }
}

/// Noise matrix for one sentence: reproducible from `(seed, sentence_id)` alone.
pub fn noise_rows(sentence_id: &str, n: usize, dim: usize, seed: u64) -> Result<Tensor> {
    if n == 0 || dim == 0 {
        return Ok(Tensor::zeros(&[n, dim]));
    }
    sample_standard_normal(n, dim, derive_seed(seed, sentence_id))
}

/// Word matrix (`n × d_in`) and aspect rows (`p × d_in`) for one sample.
pub fn build_input(sample: &AlsaSample, mode: &InputMode<'_>, embeddings: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = sample.token_ids.len();
    sample.span.check_within(n)?;
    let words = embed(&sample.token_ids, embeddings)?;
    let words = match mode {
        InputMode::Plain => words,
        InputMode::Transfer(cache) => {
            let s_t = cache.get(&sample.sentence_id)?;
            if s_t.rows() != n {
                return Err(Error::shape(
                    "build_input",
                    format!(
                        "transfer matrix for `{}` has {} rows, sentence has {} tokens",
                        sample.sentence_id,
                        s_t.rows(),
                        n
                    ),
                ));
            }
            words.concat_cols(s_t)?
        }
        InputMode::Noise { dim, seed } => {
            words.concat_cols(&noise_rows(&sample.sentence_id, n, *dim, *seed)?)?
        }
    };
    let aspect = words.slice_rows(sample.span.start, sample.span.end + 1)?;
    Ok((words, aspect))
}

/// Arithmetic mean of the aspect rows.
pub fn aspect_mean(aspect_rows: &Tensor) -> Result<Tensor> {
    if aspect_rows.rank() != 2 || aspect_rows.rows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "aspect mean over {:?}",
            aspect_rows.shape()
        )));
    }
    let (p, k) = (aspect_rows.rows(), aspect_rows.cols());
    let mut out = vec![0.0; k];
    for i in 0..p {
        for (o, x) in out.iter_mut().zip(aspect_rows.row(i)) {
            *o += x;
        }
    }
    Ok(Tensor::vector(out.into_iter().map(|x| x / p as f64).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ae::AspectSpan;
    use crate::alsa::Polarity;

    fn sample(n: usize) -> AlsaSample {
        AlsaSample {
            sentence_id: "s1".into(),
            token_ids: (0..n).collect(),
            span: AspectSpan { start: 1, end: 2 },
            label: Polarity::Negative,
            domain: None,
        }
    }

    #[test]
    fn widths_per_mode() {
        let emb = Tensor::zeros(&[6, 300]);
        let s = sample(4);
        let (w, a) = build_input(&s, &InputMode::Plain, &emb).unwrap();
        assert_eq!(w.shape(), &[4, 300]);
        assert_eq!(a.shape(), &[2, 300]);

        let mut cache = TransferCache::new();
        cache.insert("s1", Tensor::full(&[4, 64], 0.5)).unwrap();
        let (w, a) = build_input(&s, &InputMode::Transfer(&cache), &emb).unwrap();
        assert_eq!(w.shape(), &[4, 364]);
        assert_eq!(a.row(0)[300], 0.5);

        let mode = InputMode::Noise { dim: 64, seed: 3 };
        let (w1, _) = build_input(&s, &mode, &emb).unwrap();
        let (w2, _) = build_input(&s, &mode, &emb).unwrap();
        assert_eq!(w1.shape(), &[4, 364]);
        assert_eq!(w1, w2);
    }

    #[test]
    fn transfer_errors() {
        let emb = Tensor::zeros(&[6, 3]);
        let cache = TransferCache::new();
        match build_input(&sample(4), &InputMode::Transfer(&cache), &emb) {
            Err(Error::MissingTransfer(id)) => assert_eq!(id, "s1"),
            other => panic!("{:?}", other),
        }
        let mut cache = TransferCache::new();
        cache.insert("s1", Tensor::zeros(&[3, 2])).unwrap();
        assert!(build_input(&sample(4), &InputMode::Transfer(&cache), &emb).is_err());
        assert!(cache.insert("s2", Tensor::zeros(&[3, 5])).is_err());
    }

    #[test]
    fn mean_cases() {
        let m = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(aspect_mean(&m).unwrap().data(), &[0.5, 0.5]);
        let one = Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(aspect_mean(&one).unwrap().data(), &[3.0, 4.0]);
        let swapped = Tensor::matrix(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(aspect_mean(&swapped).unwrap(), aspect_mean(&m).unwrap());
        assert!(aspect_mean(&Tensor::zeros(&[0, 2])).is_err());
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.ckpt");
        let mut cache = TransferCache::new();
        cache.insert("a", Tensor::full(&[2, 3], 0.25)).unwrap();
        cache.insert("b", Tensor::full(&[1, 3], -1.0)).unwrap();
        cache.save(&path).unwrap();
        let back = TransferCache::load(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get("a").unwrap(), cache.get("a").unwrap());
        assert_eq!(back.width(), Some(3));
    }
}
