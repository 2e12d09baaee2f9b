#![allow(dead_code)]

use std::path::{Path, PathBuf};

use absa_core::data::synth::{generate, to_xml, SynthSpec};
use absa_core::data::{Dataset, Domain};
use absa_core::harness::{ExperimentConfig, PreparedData, Task};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn synth_dataset(spec: &SynthSpec) -> Dataset {
    Dataset::from_raw(&generate(spec).unwrap(), spec.domain).unwrap()
}

/// Writes a synthetic corpus as XML and returns its path.
pub fn write_synth(dir: &Path, name: &str, spec: &SynthSpec) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, to_xml(&generate(spec).unwrap())).unwrap();
    path
}

/// Small train/test pair with distinct sentence ids.
pub fn small_corpus(dir: &Path, domain: Domain, seed: u64) -> (PathBuf, PathBuf) {
    let train = SynthSpec {
        id_prefix: format!("{}-train-", domain),
        ..SynthSpec::small(domain, 24, 8, seed)
    };
    let test = SynthSpec {
        id_prefix: format!("{}-test-", domain),
        ..SynthSpec::small(domain, 12, 4, seed + 100)
    };
    (
        write_synth(dir, &format!("{}_train.xml", domain), &train),
        write_synth(dir, &format!("{}_test.xml", domain), &test),
    )
}

/// A fast configuration: small embeddings and hidden sizes, a few epochs.
pub fn tiny_config(task: Task, train: &Path, test: Option<&Path>) -> ExperimentConfig {
    ExperimentConfig {
        task,
        train_data: Some(train.to_path_buf()),
        test_data: test.map(Path::to_path_buf),
        embed_dim: 12,
        transfer_dim: 8,
        alsa_hidden: 10,
        epochs: 2,
        lr: 0.01,
        seed: 5,
        ..ExperimentConfig::default()
    }
}

pub fn prepared(cfg: &ExperimentConfig, train: Dataset, test: Option<Dataset>) -> PreparedData {
    PreparedData::new(train, test, cfg).unwrap()
}
