use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Task;
use crate::ae::{AeConfig, AeModel};
use crate::alsa::{build_input, AlsaConfig, AlsaModel, AlsaSample, InputKind, InputMode, MultitaskModel, Prediction, TransferCache};
use crate::data::{Domain, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::checkpoint::{read_archive, write_archive};
use crate::numerics::{rng_from_seed, ParamId, ParamStore, Tensor};

pub const META_FORMAT: u32 = 1;

/// Sidecar describing how to rebuild the parameter store of a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format: u32,
    pub task: Task,
    pub ae: Option<AeConfig>,
    pub alsa: Option<AlsaConfig>,
    pub input: InputKind,
    /// Width appended to each word row (transfer or noise); 0 for plain input.
    pub extra_dim: usize,
    pub noise_seed: u64,
    pub domain: Domain,
    pub ae_domain: Option<Domain>,
    pub vocabulary: Vec<String>,
    /// Epoch the stored values come from and its dev score, when known.
    pub epoch: Option<usize>,
    pub dev_score: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Model {
    Ae(AeModel),
    Alsa { model: AlsaModel, embedding: ParamId },
    Multitask(MultitaskModel),
}

/// A model with its parameters, vocabulary and metadata.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub meta: ModelMeta,
    pub store: ParamStore,
    pub model: Model,
    pub vocab: Vocabulary,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("meta.json")
}

impl ModelBundle {
    /// Builds fresh parameters described by `meta`, with embedding rows from `vocab`.
    pub fn build(meta: ModelMeta, vocab: Vocabulary, seed: u64) -> Result<Self> {
        if meta.vocabulary != vocab.tokens() {
            return Err(Error::InvalidArgument("metadata vocabulary differs from the embedding vocabulary".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut store = ParamStore::new();
        let emb = vocab.embeddings().clone();
        let model = match meta.task {
            Task::Ae => {
                let cfg = meta.ae.clone().ok_or_else(|| Error::Checkpoint("tagger metadata without config".into()))?;
                Model::Ae(AeModel::new(&mut store, "ae", emb, cfg, &mut rng)?)
            }
            Task::Alsa => {
                let cfg = meta
                    .alsa
                    .clone()
                    .ok_or_else(|| Error::Checkpoint("classifier metadata without config".into()))?;
                if cfg.input_dim != vocab.dim() + meta.extra_dim {
                    return Err(Error::Config(format!(
                        "classifier input width {} != embedding {} + extra {}",
                        cfg.input_dim,
                        vocab.dim(),
                        meta.extra_dim
                    )));
                }
                let embedding = store.add("embedding", emb)?;
                store.set_trainable(embedding, false);
                let model = AlsaModel::new(&mut store, "alsa", cfg, &mut rng)?;
                Model::Alsa { model, embedding }
            }
            Task::Multitask => {
                let ae = meta.ae.clone().ok_or_else(|| Error::Checkpoint("multi-task metadata without tagger config".into()))?;
                let hidden = meta
                    .alsa
                    .as_ref()
                    .map(|a| a.hidden)
                    .ok_or_else(|| Error::Checkpoint("multi-task metadata without classifier config".into()))?;
                Model::Multitask(MultitaskModel::new(&mut store, "mt", emb, ae, hidden, &mut rng)?)
            }
        };
        Ok(ModelBundle {
            meta,
            store,
            model,
            vocab,
        })
    }

    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        write_archive(checkpoint, self.store.named_values())?;
        let meta = meta_path(checkpoint);
        let json = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(&meta, json).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let mp = meta_path(checkpoint);
        let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        let meta: ModelMeta = serde_json::from_str(&text)?;
        if meta.format != META_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported metadata format {}", meta.format)));
        }
        let records = read_archive(checkpoint)?;
        let emb_name = match meta.task {
            Task::Ae => "ae.embedding",
            Task::Alsa => "embedding",
            Task::Multitask => "mt.ae.embedding",
        };
        let emb = records
            .iter()
            .find(|(n, _)| n == emb_name)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| Error::Checkpoint(format!("no `{}` record", emb_name)))?;
        let vocab = Vocabulary::from_parts(meta.vocabulary.clone(), emb)?;
        let mut bundle = ModelBundle::build(meta, vocab, 0)?;
        if records.len() != bundle.store.len() {
            return Err(Error::Checkpoint(format!(
                "{} records for a model of {} parameters",
                records.len(),
                bundle.store.len()
            )));
        }
        bundle.store.load_values(records.iter().map(|(n, t)| (n.as_str(), t)))?;
        Ok(bundle)
    }

    /// Copies parameter values from `(name, value)` pairs.
    pub fn load_values(&mut self, values: &[(String, Tensor)]) -> Result<()> {
        self.store.load_values(values.iter().map(|(n, t)| (n.as_str(), t)))?;
        Ok(())
    }

    pub fn snapshot(&self) -> Vec<(String, Tensor)> {
        self.store
            .named_values()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect()
    }

    pub fn ae(&self) -> Result<&AeModel> {
        match &self.model {
            Model::Ae(m) => Ok(m),
            Model::Multitask(m) => Ok(&m.ae),
            Model::Alsa { .. } => Err(self.mismatch("ae")),
        }
    }

    pub fn alsa(&self) -> Result<&AlsaModel> {
        match &self.model {
            Model::Alsa { model, .. } => Ok(model),
            Model::Multitask(m) => Ok(&m.atae),
            Model::Ae(_) => Err(self.mismatch("alsa")),
        }
    }

    pub(crate) fn mismatch(&self, expected: &str) -> Error {
        Error::ArchitectureMismatch {
            expected: expected.to_string(),
            found: self.describe(),
        }
    }

    /// `ae`, `multitask` or the classifier's architecture name.
    pub fn describe(&self) -> String {
        match &self.model {
            Model::Ae(_) => "ae".into(),
            Model::Multitask(_) => "multitask".into(),
            Model::Alsa { model, .. } => model.architecture().to_string(),
        }
    }

    /// The word-row source matching this classifier's training input.
    pub fn input_mode<'a>(&self, transfer: Option<&'a TransferCache>) -> Result<InputMode<'a>> {
        match self.meta.input {
            InputKind::Plain => Ok(InputMode::Plain),
            InputKind::Noise => Ok(InputMode::Noise {
                dim: self.meta.extra_dim,
                seed: self.meta.noise_seed,
            }),
            InputKind::Transfer => {
                let cache = transfer.ok_or_else(|| Error::Config("transfer model evaluated without an S_T cache".into()))?;
                if let Some(w) = cache.width() {
                    if w != self.meta.extra_dim {
                        return Err(Error::Config(format!(
                            "S_T cache width {} but the model was trained with {}",
                            w, self.meta.extra_dim
                        )));
                    }
                }
                Ok(InputMode::Transfer(cache))
            }
        }
    }

    /// Classifier predictions for `samples`, computed in parallel and returned in order.
    pub fn predict_alsa(&self, samples: &[AlsaSample], transfer: Option<&TransferCache>) -> Result<Vec<Prediction>> {
        match &self.model {
            Model::Alsa { model, embedding } => {
                let mode = self.input_mode(transfer)?;
                let table = self.store.value(*embedding);
                samples
                    .par_iter()
                    .map(|s| {
                        let (words, _) = build_input(s, &mode, table)?;
                        model.predict(&self.store, &words, s.span)
                    })
                    .collect()
            }
            Model::Multitask(m) => samples
                .par_iter()
                .map(|s| {
                    let (_, mut p) = m.predict(&self.store, &s.token_ids, &[s.span])?;
                    Ok(p.remove(0))
                })
                .collect(),
            Model::Ae(_) => Err(self.mismatch("alsa")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alsa::{Architecture, Polarity};
    use crate::ae::AspectSpan;

    fn meta(task: Task, vocab: &Vocabulary) -> ModelMeta {
        ModelMeta {
            format: META_FORMAT,
            task,
            ae: Some(AeConfig {
                embed_dim: vocab.dim(),
                hidden: 3,
                fine_tune_embeddings: false,
            }),
            alsa: Some(AlsaConfig {
                hidden: 4,
                ..AlsaConfig::new(Architecture::Ian, vocab.dim())
            }),
            input: InputKind::Plain,
            extra_dim: 0,
            noise_seed: 0,
            domain: Domain::Laptop,
            ae_domain: None,
            vocabulary: vocab.tokens().to_vec(),
            epoch: Some(3),
            dev_score: Some(50.0),
        }
    }

    #[test]
    fn roundtrip_every_task() {
        let vocab = Vocabulary::random(["screen", "is", "dim"], 5, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sample = AlsaSample {
            sentence_id: "1".into(),
            token_ids: vec![1, 2, 3],
            span: AspectSpan { start: 0, end: 0 },
            label: Polarity::Negative,
            domain: None,
        };
        for task in [Task::Ae, Task::Alsa, Task::Multitask] {
            let b = ModelBundle::build(meta(task, &vocab), vocab.clone(), 4).unwrap();
            let path = dir.path().join(format!("{}.ckpt", task));
            b.save(&path).unwrap();
            let back = ModelBundle::load(&path).unwrap();
            assert_eq!(back.meta, b.meta);
            assert_eq!(back.describe(), b.describe());
            if task != Task::Ae {
                let p1 = b.predict_alsa(std::slice::from_ref(&sample), None).unwrap();
                let p2 = back.predict_alsa(std::slice::from_ref(&sample), None).unwrap();
                assert_eq!(p1[0].label, p2[0].label);
                assert!((p1[0].logits[0] - p2[0].logits[0]).abs() < 1e-5);
            } else {
                assert!(back.predict_alsa(&[sample.clone()], None).is_err());
            }
        }
    }
}
