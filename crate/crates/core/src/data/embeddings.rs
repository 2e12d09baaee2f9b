use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{rng_from_seed, Tensor};

pub const EMBED_DIM: usize = 300;
pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_BOUND: f64 = 0.25;
pub const DEFAULT_UNK_SEED: u64 = 13;

/// Token ids and their embedding rows. Id 0 is the unknown-word row.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    embeddings: Tensor,
}

impl Vocabulary {
    pub const UNK: usize = 0;

    /// `tokens[0]` must be the unknown token; one embedding row per token.
    pub fn from_parts(tokens: Vec<String>, embeddings: Tensor) -> Result<Self> {
        if embeddings.rank() != 2 || embeddings.rows() != tokens.len() || tokens.is_empty() {
            return Err(Error::shape(
                "vocabulary",
                format!("{} tokens, embeddings {:?}", tokens.len(), embeddings.shape()),
            ));
        }
        if tokens[0] != UNK_TOKEN {
            return Err(Error::InvalidArgument(format!("first token must be {}", UNK_TOKEN)));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("token `{}` listed twice", t)));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            embeddings,
        })
    }

    /// Every token gets a fresh uniform row; used for synthetic corpora.
    pub fn random<'a>(tokens: impl IntoIterator<Item = &'a str>, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let mut list = vec![UNK_TOKEN.to_string()];
        let mut seen = HashSet::new();
        for t in tokens {
            if t != UNK_TOKEN && seen.insert(t) {
                list.push(t.to_string());
            }
        }
        let data = (0..list.len() * dim)
            .map(|_| rng.random_range(-UNK_BOUND..=UNK_BOUND))
            .collect();
        Self::from_parts(list.clone(), Tensor::matrix(list.len(), dim, data)?)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Falls back to the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(Self::UNK)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn embeddings(&self) -> &Tensor {
        &self.embeddings
    }

    pub fn row(&self, token: &str) -> &[f64] {
        self.embeddings.row(self.id(token))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingOptions {
    pub dim: usize,
    pub unk_seed: u64,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            dim: EMBED_DIM,
            unk_seed: DEFAULT_UNK_SEED,
        }
    }
}

/// Loads a whitespace-separated text embedding file (token then `dim` reals
/// per line), keeping only rows for `wanted` tokens. Every line is validated.
pub fn load_embeddings<S: AsRef<str>>(path: &Path, wanted: &[S]) -> Result<Vocabulary> {
    load_embeddings_with(path, wanted, EmbeddingOptions::default())
}

pub fn load_embeddings_with<S: AsRef<str>>(path: &Path, wanted: &[S], opts: EmbeddingOptions) -> Result<Vocabulary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let wanted: HashSet<&str> = wanted.iter().map(|s| s.as_ref()).collect();
    let bad = |line: usize, message: String| Error::Embeddings {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rng = rng_from_seed(opts.unk_seed);
    let unk_row: Vec<f64> = (0..opts.dim).map(|_| rng.random_range(-UNK_BOUND..=UNK_BOUND)).collect();
    let mut tokens = vec![UNK_TOKEN.to_string()];
    let mut data = unk_row;
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != opts.dim {
            return Err(bad(
                line_no,
                format!("expected {} values after the token, found {}", opts.dim, values.len()),
            ));
        }
        if !wanted.contains(token) || token == UNK_TOKEN || !seen.insert(token.to_string()) {
            continue;
        }
        for v in values {
            data.push(v.parse::<f64>().map_err(|_| bad(line_no, format!("`{}` is not a number", v)))?);
        }
        tokens.push(token.to_string());
    }
    let rows = tokens.len();
    Vocabulary::from_parts(tokens, Tensor::matrix(rows, opts.dim, data)?)
}
