use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use super::metrics::{macro_f1, macro_f1_sliced, MetricsReport};
use super::model::{Model, ModelBundle, ModelMeta, META_FORMAT};
use crate::ae::{ae_predict, decode_spans, span_scores, AeConfig, AspectSpan, SpanScores};
use crate::alsa::{build_input, AlsaConfig, AlsaSample, InputKind, Polarity, TransferCache};
use crate::crf::BioSequence;
use crate::data::{
    load_embeddings_with, multi_aspect_mask, Dataset, EmbeddingOptions, Vocabulary, DEFAULT_UNK_SEED,
};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, derive_seed, forward_backward, rng_from_seed, AdamConfig, Graph, Tensor, Var};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    /// Dev macro F1 (classifiers) or span F1 (tagger), as a percentage.
    pub dev_score: Option<f64>,
    pub train_score: Option<f64>,
}

pub struct TrainOutcome {
    /// Values from the epoch with the best dev score (the last epoch without a dev split).
    pub best: ModelBundle,
    pub last: ModelBundle,
    pub log: Vec<EpochLog>,
    pub steps: usize,
}

impl TrainOutcome {
    pub fn best_dev_score(&self) -> Option<f64> {
        self.best.meta.dev_score
    }
}

/// Inputs shared by every run on the same data.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub vocab: Vocabulary,
    pub transfer: Option<TransferCache>,
    pub test_transfer: Option<TransferCache>,
}

impl PreparedData {
    /// Builds the vocabulary from both splits; embeddings are random when no file is given.
    pub fn new(train: Dataset, test: Option<Dataset>, cfg: &ExperimentConfig) -> Result<Self> {
        let mut tokens = train.token_types();
        if let Some(t) = &test {
            tokens.extend(t.token_types());
        }
        let vocab = match &cfg.embeddings {
            Some(p) => load_embeddings_with(
                p,
                &tokens,
                EmbeddingOptions {
                    dim: cfg.embed_dim,
                    unk_seed: DEFAULT_UNK_SEED,
                },
            )?,
            None => Vocabulary::random(tokens.iter().map(String::as_str), cfg.embed_dim, derive_seed(cfg.seed, "embeddings"))?,
        };
        Ok(PreparedData {
            train,
            test,
            vocab,
            transfer: None,
            test_transfer: None,
        })
    }

    pub fn test_transfer(&self) -> Option<&TransferCache> {
        self.test_transfer.as_ref().or(self.transfer.as_ref())
    }
}

pub fn load_dataset(path: &Path, domain: crate::data::Domain) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        Dataset::load_jsonl(path)
    } else {
        Dataset::from_xml_file(path, domain)
    }
}

/// Loads data, embeddings and transfer caches named by `cfg`.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let train = load_dataset(cfg.train_data.as_deref().expect("validated"), cfg.domain)?;
    let test = cfg.test_data.as_deref().map(|p| load_dataset(p, cfg.domain)).transpose()?;
    let mut data = PreparedData::new(train, test, cfg)?;
    if cfg.task == Task::Alsa && cfg.input == InputKind::Transfer {
        data.transfer = Some(TransferCache::load(cfg.st_cache.as_deref().expect("validated"))?);
        data.test_transfer = cfg.test_st_cache.as_deref().map(TransferCache::load).transpose()?;
    }
    Ok(data)
}

/// Seeded stratified split: `fraction` of each label group (rounded) goes to dev.
pub fn stratified_split<T: Clone>(items: &[T], label: impl Fn(&T) -> usize, fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, it) in items.iter().enumerate() {
        let l = label(it);
        if groups.len() <= l {
            groups.resize(l + 1, Vec::new());
        }
        groups[l].push(i);
    }
    let mut rng = rng_from_seed(derive_seed(seed, "dev-split"));
    let mut in_dev = vec![false; items.len()];
    for g in &mut groups {
        g.shuffle(&mut rng);
        let k = (g.len() as f64 * fraction).round() as usize;
        for &i in g.iter().take(k) {
            in_dev[i] = true;
        }
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (it, d) in items.iter().zip(in_dev) {
        if d {
            dev.push(it.clone());
        } else {
            train.push(it.clone());
        }
    }
    (train, dev)
}

/// Corpus-level exact-match span scores of the tagger on `(tokens, gold)` pairs.
pub fn tagger_scores(bundle: &ModelBundle, examples: &[(String, Vec<usize>, BioSequence)]) -> Result<SpanScores> {
    let ae = bundle.ae()?;
    let counts = examples
        .par_iter()
        .map(|(_, ids, gold)| {
            let pred = decode_spans(&ae_predict(ae, &bundle.store, ids)?);
            let gold = decode_spans(gold);
            let hits = pred.iter().filter(|p| gold.contains(p)).count();
            Ok((hits, pred.len(), gold.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (h, p, g) = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(span_scores(h, p, g))
}

/// Classifier metrics with SA/MA slices over `samples`.
pub fn classifier_report(bundle: &ModelBundle, samples: &[AlsaSample], transfer: Option<&TransferCache>) -> Result<MetricsReport> {
    let preds = bundle.predict_alsa(samples, transfer)?;
    let p: Vec<Polarity> = preds.iter().map(|p| p.label).collect();
    let g: Vec<Polarity> = samples.iter().map(|s| s.label).collect();
    macro_f1_sliced(&p, &g, &multi_aspect_mask(samples))
}

fn accuracy_percent(bundle: &ModelBundle, samples: &[AlsaSample], transfer: Option<&TransferCache>) -> Result<f64> {
    let preds = bundle.predict_alsa(samples, transfer)?;
    let p: Vec<Polarity> = preds.iter().map(|p| p.label).collect();
    let g: Vec<Polarity> = samples.iter().map(|s| s.label).collect();
    Ok(macro_f1(&p, &g)?.overall.accuracy)
}

/// One multi-task training unit: a sentence with its tags and labelled aspects.
#[derive(Clone, Debug)]
struct MultitaskItem {
    token_ids: Vec<usize>,
    tags: Option<BioSequence>,
    aspects: Vec<(AspectSpan, Polarity)>,
    sentence_id: String,
}

fn multitask_items(data: &Dataset, vocab: &Vocabulary) -> Vec<MultitaskItem> {
    data.sentences
        .iter()
        .map(|s| MultitaskItem {
            token_ids: vocab.ids(&s.token_texts()),
            tags: s.tags.clone(),
            aspects: s.labelled_aspects().collect(),
            sentence_id: s.id.clone(),
        })
        .filter(|m| m.tags.is_some() || !m.aspects.is_empty())
        .collect()
}

fn multitask_samples(items: &[MultitaskItem]) -> Vec<AlsaSample> {
    items
        .iter()
        .flat_map(|m| {
            m.aspects.iter().map(move |&(span, label)| AlsaSample {
                sentence_id: m.sentence_id.clone(),
                token_ids: m.token_ids.clone(),
                span,
                label,
                domain: None,
            })
        })
        .collect()
}

/// Trains the model described by `cfg` on prepared data. Nothing is written.
pub fn train_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<TrainOutcome> {
    let adam = AdamConfig {
        lr: cfg.lr,
        l2_lambda: cfg.l2_lambda,
        ..AdamConfig::default()
    };
    adam.validate()?;
    let vocab = &data.vocab;
    let base_meta = ModelMeta {
        format: META_FORMAT,
        task: cfg.task,
        ae: None,
        alsa: None,
        input: InputKind::Plain,
        extra_dim: 0,
        noise_seed: 0,
        domain: cfg.domain,
        ae_domain: None,
        vocabulary: vocab.tokens().to_vec(),
        epoch: None,
        dev_score: None,
    };
    let ae_config = AeConfig {
        embed_dim: vocab.dim(),
        hidden: cfg.transfer_dim / 2,
        fine_tune_embeddings: cfg.fine_tune_embeddings,
    };
    let init_seed = derive_seed(cfg.seed, "init");
    match cfg.task {
        Task::Ae => {
            let examples = data.train.ae_examples(vocab);
            if examples.is_empty() {
                return Err(Error::InvalidArgument("no taggable sentences in the training data".into()));
            }
            let (train, dev) = if cfg.dev_fraction > 0.0 {
                stratified_split(&examples, |_| 0, cfg.dev_fraction, cfg.seed)
            } else {
                (examples, Vec::new())
            };
            let meta = ModelMeta {
                ae: Some(ae_config),
                ..base_meta
            };
            let mut bundle = ModelBundle::build(meta, vocab.clone(), init_seed)?;
            let loss = |m: &Model, g: &mut Graph<'_>, ex: &(String, Vec<usize>, BioSequence)| match m {
                Model::Ae(ae) => ae.loss(g, &ex.1, &ex.2),
                _ => unreachable!(),
            };
            let dev_score = |b: &ModelBundle| -> Result<Option<f64>> {
                if dev.is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(100.0 * tagger_scores(b, &dev)?.f1))
                }
            };
            let train_score = |b: &ModelBundle| Ok(100.0 * tagger_scores(b, &train)?.f1);
            run_epochs(cfg, &adam, &mut bundle, &train, loss, dev_score, train_score)
        }
        Task::Alsa => {
            let samples = data.train.alsa_samples(vocab);
            if samples.is_empty() {
                return Err(Error::InvalidArgument("no labelled aspects in the training data".into()));
            }
            let (train, dev) = if cfg.dev_fraction > 0.0 {
                stratified_split(&samples, |s| s.label.index(), cfg.dev_fraction, cfg.seed)
            } else {
                (samples, Vec::new())
            };
            let extra_dim = match cfg.input {
                InputKind::Plain => 0,
                InputKind::Noise => cfg.transfer_dim,
                InputKind::Transfer => data
                    .transfer
                    .as_ref()
                    .ok_or_else(|| Error::Config("transfer input needs an S_T cache".into()))?
                    .width()
                    .unwrap_or(0),
            };
            let meta = ModelMeta {
                alsa: Some(AlsaConfig {
                    hidden: cfg.alsa_hidden,
                    attn_dim: cfg.attn_dim,
                    ..AlsaConfig::new(cfg.architecture, vocab.dim() + extra_dim)
                }),
                input: cfg.input,
                extra_dim,
                noise_seed: derive_seed(cfg.seed, "noise"),
                ae_domain: (cfg.input == InputKind::Transfer).then(|| cfg.ae_domain_or_default()),
                ..base_meta
            };
            let mut bundle = ModelBundle::build(meta, vocab.clone(), init_seed)?;
            let transfer = data.transfer.as_ref();
            let mode = bundle.input_mode(transfer)?;
            let loss = move |m: &Model, g: &mut Graph<'_>, s: &AlsaSample| -> Result<Var> {
                match m {
                    Model::Alsa { model, embedding } => {
                        let table = g.store().value(*embedding);
                        let (words, _) = build_input(s, &mode, table)?;
                        let x = g.input(words);
                        model.loss(g, x, s.span, s.label)
                    }
                    _ => unreachable!(),
                }
            };
            let dev_score = |b: &ModelBundle| -> Result<Option<f64>> {
                if dev.is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(classifier_report(b, &dev, transfer)?.macro_f1()))
                }
            };
            let train_score = |b: &ModelBundle| accuracy_percent(b, &train, transfer);
            run_epochs(cfg, &adam, &mut bundle, &train, loss, dev_score, train_score)
        }
        Task::Multitask => {
            let items = multitask_items(&data.train, vocab);
            if items.is_empty() {
                return Err(Error::InvalidArgument("no annotated sentences in the training data".into()));
            }
            let (train, dev) = if cfg.dev_fraction > 0.0 {
                stratified_split(&items, |_| 0, cfg.dev_fraction, cfg.seed)
            } else {
                (items, Vec::new())
            };
            let dev_samples = multitask_samples(&dev);
            let train_samples = multitask_samples(&train);
            let meta = ModelMeta {
                ae: Some(ae_config),
                alsa: Some(AlsaConfig {
                    hidden: cfg.alsa_hidden,
                    ..AlsaConfig::new(cfg.architecture, cfg.transfer_dim)
                }),
                ..base_meta
            };
            let mut bundle = ModelBundle::build(meta, vocab.clone(), init_seed)?;
            let loss = |m: &Model, g: &mut Graph<'_>, it: &MultitaskItem| match m {
                Model::Multitask(mt) => mt.loss(g, &it.token_ids, it.tags.as_ref(), &it.aspects),
                _ => unreachable!(),
            };
            let dev_score = |b: &ModelBundle| -> Result<Option<f64>> {
                if dev_samples.is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(classifier_report(b, &dev_samples, None)?.macro_f1()))
                }
            };
            let train_score = |b: &ModelBundle| {
                if train_samples.is_empty() {
                    Ok(100.0)
                } else {
                    accuracy_percent(b, &train_samples, None)
                }
            };
            run_epochs(cfg, &adam, &mut bundle, &train, loss, dev_score, train_score)
        }
    }
}

fn run_epochs<T, L, D, S>(
    cfg: &ExperimentConfig,
    adam: &AdamConfig,
    bundle: &mut ModelBundle,
    items: &[T],
    loss: L,
    dev_score: D,
    train_score: S,
) -> Result<TrainOutcome>
where
    L: Fn(&Model, &mut Graph<'_>, &T) -> Result<Var>,
    D: Fn(&ModelBundle) -> Result<Option<f64>>,
    S: Fn(&ModelBundle) -> Result<f64>,
{
    let mut log = Vec::new();
    let mut steps = 0usize;
    let mut best: Option<(f64, usize, Vec<(String, Tensor)>)> = None;
    let budget = cfg.max_steps.unwrap_or(usize::MAX);
    for epoch in 1..=cfg.epochs {
        if steps >= budget {
            break;
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, &format!("epoch-{}", epoch))));
        let mut total = 0.0;
        let mut seen = 0usize;
        for &i in &order {
            if steps >= budget {
                break;
            }
            let l = {
                let ModelBundle { store, model, .. } = &mut *bundle;
                forward_backward(store, |g| loss(model, g, &items[i]))?
            };
            if !l.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite training loss at epoch {} step {}",
                    epoch,
                    steps + 1
                )));
            }
            adam_step(&mut bundle.store, adam)?;
            total += l;
            seen += 1;
            steps += 1;
        }
        let dev = dev_score(bundle)?;
        let fit = if cfg.stop_when_fit { Some(train_score(bundle)?) } else { None };
        let entry = EpochLog {
            epoch,
            steps,
            train_loss: if seen > 0 { total / seen as f64 } else { 0.0 },
            dev_score: dev,
            train_score: fit,
        };
        log::info!(
            "epoch {} steps {} loss {:.6} dev {}",
            entry.epoch,
            entry.steps,
            entry.train_loss,
            dev.map(|d| format!("{:.2}", d)).unwrap_or_else(|| "-".into())
        );
        log.push(entry);
        if let Some(d) = dev {
            if best.as_ref().is_none_or(|(b, _, _)| d > *b) {
                best = Some((d, epoch, bundle.snapshot()));
            }
        }
        if fit.is_some_and(|f| f >= 100.0) {
            break;
        }
    }
    let mut last = bundle.clone();
    last.meta.epoch = log.last().map(|l| l.epoch);
    last.meta.dev_score = log.last().and_then(|l| l.dev_score);
    let best = match best {
        Some((score, epoch, values)) => {
            let mut b = bundle.clone();
            b.load_values(&values)?;
            b.meta.epoch = Some(epoch);
            b.meta.dev_score = Some(score);
            b
        }
        None => last.clone(),
    };
    Ok(TrainOutcome { best, last, log, steps })
}

/// Paths written by [`train`] for an output prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunFiles {
    pub best: PathBuf,
    pub last: PathBuf,
    pub log: PathBuf,
    pub config: PathBuf,
}

impl RunFiles {
    pub fn for_prefix(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        RunFiles {
            best: with(".best.ckpt"),
            last: with(".final.ckpt"),
            log: with(".log.jsonl"),
            config: with(".config"),
        }
    }
}

pub fn write_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for l in log {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads inputs, trains, and writes best and final checkpoints, the epoch
/// log and the effective config under `cfg.output`.
pub fn train(cfg: &ExperimentConfig) -> Result<(TrainOutcome, Option<RunFiles>)> {
    let data = prepare(cfg)?;
    let outcome = train_prepared(cfg, &data)?;
    let files = match &cfg.output {
        Some(prefix) => {
            if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let files = RunFiles::for_prefix(prefix);
            outcome.best.save(&files.best)?;
            outcome.last.save(&files.last)?;
            write_log(&files.log, &outcome.log)?;
            std::fs::write(&files.config, cfg.to_kv_string()).map_err(|e| Error::io(&files.config, e))?;
            Some(files)
        }
        None => None,
    };
    Ok((outcome, files))
}

/// Label counts per class of `samples`.
pub fn label_histogram(samples: &[AlsaSample]) -> HashMap<Polarity, usize> {
    let mut h = HashMap::new();
    for s in samples {
        *h.entry(s.label).or_default() += 1;
    }
    h
}
