use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alsa::{Architecture, InputKind};
use crate::data::{Domain, EMBED_DIM};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ae,
    Alsa,
    Multitask,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "ae" => Ok(Task::Ae),
            "alsa" => Ok(Task::Alsa),
            "multitask" => Ok(Task::Multitask),
            _ => Err(Error::Config(format!("unknown task `{}`", s))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ae => "ae",
            Task::Alsa => "alsa",
            Task::Multitask => "multitask",
        })
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub architecture: Architecture,
    pub input: InputKind,
    /// Domain of the sentiment (or, for `ae`, tagging) data.
    pub domain: Domain,
    /// Domain the transfer representations come from; defaults to `domain`.
    pub ae_domain: Option<Domain>,
    pub lr: f64,
    pub l2_lambda: f64,
    /// Width of the transfer rows (twice the tagger's GRU size) and of noise rows.
    pub transfer_dim: usize,
    pub alsa_hidden: usize,
    pub attn_dim: Option<usize>,
    /// Embedding width when no embedding file is given (random rows).
    pub embed_dim: usize,
    pub fine_tune_embeddings: bool,
    pub epochs: usize,
    /// Stops once this many optimizer steps have run.
    pub max_steps: Option<usize>,
    /// Stops at the end of the first epoch with a perfect training score.
    pub stop_when_fit: bool,
    pub dev_fraction: f64,
    pub seed: u64,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub st_cache: Option<PathBuf>,
    /// Transfer cache for the test data when it differs from `st_cache`.
    pub test_st_cache: Option<PathBuf>,
    pub ae_checkpoint: Option<PathBuf>,
    /// Output prefix for checkpoints and logs.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Alsa,
            architecture: Architecture::Atae,
            input: InputKind::Plain,
            domain: Domain::Laptop,
            ae_domain: None,
            lr: 0.001,
            l2_lambda: 0.0,
            transfer_dim: 64,
            alsa_hidden: 128,
            attn_dim: None,
            embed_dim: EMBED_DIM,
            fine_tune_embeddings: false,
            epochs: 25,
            max_steps: None,
            stop_when_fit: false,
            dev_fraction: 0.1,
            seed: 1,
            train_data: None,
            test_data: None,
            embeddings: None,
            st_cache: None,
            test_st_cache: None,
            ae_checkpoint: None,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{}` is not a valid value for {}", value, key)))
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" | "-" => None,
        v => Some(v),
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 24] = [
        "task",
        "architecture",
        "input",
        "domain",
        "ae_domain",
        "lr",
        "l2_lambda",
        "transfer_dim",
        "alsa_hidden",
        "attn_dim",
        "embed_dim",
        "fine_tune_embeddings",
        "epochs",
        "max_steps",
        "stop_when_fit",
        "dev_fraction",
        "seed",
        "train_data",
        "test_data",
        "embeddings",
        "st_cache",
        "test_st_cache",
        "ae_checkpoint",
        "output",
    ];

    /// Sets one field from its textual form. Dashes in keys read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let path = |v: &str| optional(v).map(PathBuf::from);
        match key.as_str() {
            "task" => self.task = value.parse()?,
            "architecture" | "arch" => self.architecture = value.parse()?,
            "input" => self.input = value.parse()?,
            "domain" => self.domain = value.parse()?,
            "ae_domain" => self.ae_domain = optional(value).map(str::parse).transpose()?,
            "lr" => self.lr = parse(&key, value)?,
            "l2_lambda" | "l2" => self.l2_lambda = parse(&key, value)?,
            "transfer_dim" | "d_t" => self.transfer_dim = parse(&key, value)?,
            "alsa_hidden" | "hidden" => self.alsa_hidden = parse(&key, value)?,
            "attn_dim" => self.attn_dim = optional(value).map(|v| parse(&key, v)).transpose()?,
            "embed_dim" => self.embed_dim = parse(&key, value)?,
            "fine_tune_embeddings" => self.fine_tune_embeddings = parse(&key, value)?,
            "epochs" => self.epochs = parse(&key, value)?,
            "max_steps" => self.max_steps = optional(value).map(|v| parse(&key, v)).transpose()?,
            "stop_when_fit" => self.stop_when_fit = parse(&key, value)?,
            "dev_fraction" => self.dev_fraction = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "train_data" => self.train_data = path(value),
            "test_data" => self.test_data = path(value),
            "embeddings" => self.embeddings = path(value),
            "st_cache" => self.st_cache = path(value),
            "test_st_cache" => self.test_st_cache = path(value),
            "ae_checkpoint" => self.ae_checkpoint = path(value),
            "output" => self.output = path(value),
            _ => return Err(Error::Config(format!("unknown key `{}`", key))),
        }
        Ok(())
    }

    /// Reads `key = value` lines (`:` also separates); `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e)))?;
        }
        Ok(())
    }

    pub fn from_kv_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    /// The same config as `key = value` lines; `from_kv_str` reads it back.
    pub fn to_kv_string(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into());
        let o = |o: Option<usize>| o.map(|v| v.to_string()).unwrap_or_else(|| "none".into());
        [
            ("task", self.task.to_string()),
            ("architecture", self.architecture.to_string()),
            ("input", self.input.to_string()),
            ("domain", self.domain.to_string()),
            ("ae_domain", self.ae_domain.map(|d| d.to_string()).unwrap_or_else(|| "none".into())),
            ("lr", format!("{:?}", self.lr)),
            ("l2_lambda", format!("{:?}", self.l2_lambda)),
            ("transfer_dim", self.transfer_dim.to_string()),
            ("alsa_hidden", self.alsa_hidden.to_string()),
            ("attn_dim", o(self.attn_dim)),
            ("embed_dim", self.embed_dim.to_string()),
            ("fine_tune_embeddings", self.fine_tune_embeddings.to_string()),
            ("epochs", self.epochs.to_string()),
            ("max_steps", o(self.max_steps)),
            ("stop_when_fit", self.stop_when_fit.to_string()),
            ("dev_fraction", format!("{:?}", self.dev_fraction)),
            ("seed", self.seed.to_string()),
            ("train_data", p(&self.train_data)),
            ("test_data", p(&self.test_data)),
            ("embeddings", p(&self.embeddings)),
            ("st_cache", p(&self.st_cache)),
            ("test_st_cache", p(&self.test_st_cache)),
            ("ae_checkpoint", p(&self.ae_checkpoint)),
            ("output", p(&self.output)),
        ]
        .iter()
        .map(|(k, v)| format!("{} = {}\n", k, v))
        .collect()
    }

    pub fn ae_domain_or_default(&self) -> Domain {
        self.ae_domain.unwrap_or(self.domain)
    }

    /// Checks value ranges and the presence of the inputs the task needs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be a finite non-negative number, got {}", self.lr));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda must be non-negative, got {}", self.l2_lambda));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return bad(format!("dev_fraction must be in [0, 1), got {}", self.dev_fraction));
        }
        if self.alsa_hidden == 0 || self.embed_dim == 0 {
            return bad("hidden and embedding sizes must be positive".into());
        }
        if matches!(self.task, Task::Ae | Task::Multitask) && (self.transfer_dim == 0 || self.transfer_dim % 2 != 0) {
            return bad(format!(
                "transfer_dim must be a positive even number for the tagger, got {}",
                self.transfer_dim
            ));
        }
        match &self.train_data {
            None => return bad("train_data is required".into()),
            Some(p) if !p.exists() => return bad(format!("train_data {} does not exist", p.display())),
            _ => {}
        }
        for p in [&self.test_data, &self.embeddings, &self.ae_checkpoint].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        if self.task == Task::Alsa && self.input == InputKind::Transfer {
            match &self.st_cache {
                None => return bad("transfer input needs st_cache".into()),
                Some(p) if !p.exists() => return bad(format!("st_cache {} does not exist", p.display())),
                _ => {}
            }
            if let Some(p) = &self.test_st_cache {
                if !p.exists() {
                    return bad(format!("test_st_cache {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }
}

/// Tuned `(lr, l2_lambda)` reported for each classifier, plain or with transfer rows.
pub fn tuned_optimum(architecture: Architecture, transfer: bool, domain: Domain) -> (f64, f64) {
    use Architecture::*;
    use Domain::*;
    match (architecture, transfer, domain) {
        (TcLstm, false, Laptop) => (0.002, 0.001),
        (TcLstm, false, Restaurant) => (0.002, 1e-6),
        (Atae, false, Laptop) => (0.001, 0.001),
        (Atae, false, Restaurant) => (0.002, 1e-5),
        (Ian, false, _) => (0.002, 1e-5),
        (TcLstm, true, _) => (0.002, 1e-6),
        (Atae, true, _) => (0.002, 0.001),
        (Ian, true, Laptop) => (0.001, 1e-6),
        (Ian, true, Restaurant) => (0.002, 1e-5),
    }
}

/// Tagger learning rate and transfer width (both domains).
pub const AE_OPTIMUM: (f64, usize) = (0.001, 64);

impl ExperimentConfig {
    /// Replaces `lr` and `l2_lambda` with the tuned values for this run's
    /// architecture, input and domain. Tagger runs get the tagger optimum.
    pub fn with_tuned_optimum(mut self) -> Self {
        match self.task {
            Task::Ae => {
                self.lr = AE_OPTIMUM.0;
                self.transfer_dim = AE_OPTIMUM.1;
            }
            _ => {
                let (lr, l2) = tuned_optimum(self.architecture, self.input == InputKind::Transfer, self.domain);
                self.lr = lr;
                self.l2_lambda = l2;
            }
        }
        self
    }
}
