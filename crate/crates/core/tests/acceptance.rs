//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so the
//! lines come out in order; exits nonzero when any criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use absa_core::ae::{AeConfig, AeModel, AspectSpan};
use absa_core::alsa::{
    build_input, noise_rows, AlsaConfig, AlsaModel, AlsaSample, Architecture, InputKind, InputMode, MultitaskModel,
    Polarity, TransferCache,
};
use absa_core::crf::{brute_force_oracle, log_partition, path_score, viterbi, BioSequence, CrfScores, Tag};
use absa_core::data::synth::{generate, to_xml, Split, SynthSpec};
use absa_core::data::{multi_aspect_mask, parse_semeval, Dataset, Domain};
use absa_core::harness::{
    dump_attention, export_st, majority_closed_form, majority_report, tagger_scores, train, train_prepared,
    ExperimentConfig, RunFiles, Task,
};
use absa_core::numerics::{grad_check, rng_from_seed, GradCheckOptions, ParamStore, Tensor};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- table counts

const TABLE1: [(Domain, Split, [usize; 3]); 4] = [
    (Domain::Restaurant, Split::Train, [2164, 807, 637]),
    (Domain::Restaurant, Split::Test, [728, 196, 196]),
    (Domain::Laptop, Split::Train, [994, 870, 464]),
    (Domain::Laptop, Split::Test, [341, 128, 169]),
];

const TABLE2: [(Domain, Split, usize, usize); 4] = [
    (Domain::Restaurant, Split::Train, 1063, 2545),
    (Domain::Restaurant, Split::Test, 302, 818),
    (Domain::Laptop, Split::Train, 957, 1371),
    (Domain::Laptop, Split::Test, 269, 369),
];

const MAJORITY: [(Domain, &str); 2] = [(Domain::Laptop, "23.22"), (Domain::Restaurant, "26.26")];

/// SemEval-2014 files, when `ABSA_SEMEVAL_DIR` points at them.
fn real_file(domain: Domain, split: Split) -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("ABSA_SEMEVAL_DIR")?);
    let names: &[&str] = match (domain, split) {
        (Domain::Laptop, Split::Train) => &["Laptop_Train_v2.xml", "Laptops_Train.xml", "laptop_train.xml"],
        (Domain::Laptop, Split::Test) => &["Laptops_Test_Gold.xml", "laptop_test.xml"],
        (Domain::Restaurant, Split::Train) => &["Restaurants_Train_v2.xml", "Restaurants_Train.xml", "restaurant_train.xml"],
        (Domain::Restaurant, Split::Test) => &["Restaurants_Test_Gold.xml", "restaurant_test.xml"],
    };
    names.iter().map(|n| dir.join(n)).find(|p| p.exists())
}

/// Ingests one split through XML text: real files when available, otherwise a
/// synthetic corpus built to the published counts.
fn ingest(domain: Domain, split: Split) -> Result<(Dataset, &'static str), String> {
    if let Some(p) = real_file(domain, split) {
        return Dataset::from_xml_file(&p, domain).map(|d| (d, "SemEval")).map_err(e2s);
    }
    let xml = to_xml(&generate(&SynthSpec::semeval(domain, split, 2014)).map_err(e2s)?);
    let raw = parse_semeval(&xml).map_err(e2s)?;
    Dataset::from_raw(&raw, domain).map(|d| (d, "synthetic")).map_err(e2s)
}

fn samples(d: &Dataset) -> Vec<AlsaSample> {
    d.sentences
        .iter()
        .flat_map(|s| {
            s.labelled_aspects().map(move |(span, label)| AlsaSample {
                sentence_id: s.id.clone(),
                token_ids: vec![],
                span,
                label,
                domain: Some(s.domain),
            })
        })
        .collect()
}

fn sa_ma(d: &Dataset) -> (usize, usize) {
    let mask = multi_aspect_mask(&samples(d));
    let ma = mask.iter().filter(|&&m| m).count();
    (mask.len() - ma, ma)
}

// ------------------------------------------------------------------ criteria

fn criterion_1() -> Outcome {
    for (domain, want) in MAJORITY {
        let counts = TABLE1.iter().find(|t| t.0 == domain && t.1 == Split::Test).unwrap().2;
        let closed = format!("{:.2}", majority_closed_form(counts, Polarity::Positive));
        ensure(closed == want, || format!("{} closed form {} != {}", domain, closed, want))?;
    }
    let mut source = "";
    for (domain, want) in MAJORITY {
        let (train, s) = ingest(domain, Split::Train)?;
        let (test, _) = ingest(domain, Split::Test)?;
        source = s;
        let r = majority_report(&train, &test).map_err(e2s)?;
        let got = format!("{:.2}", r.macro_f1());
        ensure(got == want, || format!("{} majority {} != {}", domain, got, want))?;
    }
    let fixture = Dataset::from_xml_file(&common::fixture("laptop_small.xml"), Domain::Laptop).map_err(e2s)?;
    let r = majority_report(&fixture, &fixture).map_err(e2s)?;
    // 4 positive of 11: 100 * 2*4/(11+4) / 3
    ensure(format!("{:.2}", r.macro_f1()) == "17.78", || format!("fixture majority {:.2}", r.macro_f1()))?;
    Ok(format!(
        "closed form 23.22/26.26; {} ingest 23.22/26.26; fixture 17.78",
        source
    ))
}

fn criterion_2() -> Outcome {
    let mut source = "";
    for ((domain, split, labels), (_, _, sa, ma)) in TABLE1.iter().zip(TABLE2.iter()) {
        let (d, s) = ingest(*domain, *split)?;
        source = s;
        let got = d.label_counts();
        ensure(got == *labels, || format!("{} {:?}: labels {:?} != {:?}", domain, split, got, labels))?;
        let (gsa, gma) = sa_ma(&d);
        ensure((gsa, gma) == (*sa, *ma), || {
            format!("{} {:?}: SA/MA {}/{} != {}/{}", domain, split, gsa, gma, sa, ma)
        })?;
        ensure(gsa + gma == labels.iter().sum::<usize>(), || "SA + MA != row sum".into())?;
    }
    // hand-counted fixture
    let d = Dataset::from_xml_file(&common::fixture("laptop_small.xml"), Domain::Laptop).map_err(e2s)?;
    ensure(d.len() == 8, || format!("fixture sentences {}", d.len()))?;
    ensure(d.label_counts() == [4, 4, 3], || format!("fixture labels {:?}", d.label_counts()))?;
    ensure(sa_ma(&d) == (2, 9), || format!("fixture SA/MA {:?}", sa_ma(&d)))?;
    let conflicts = d
        .sentences
        .iter()
        .flat_map(|s| &s.aspects)
        .filter(|a| a.polarity.label().is_none())
        .count();
    ensure(conflicts == 2, || format!("fixture conflicts {}", conflicts))?;
    let f4 = d.sentences.iter().find(|s| s.id == "f4").unwrap();
    let span = f4.aspects[0].span;
    let words: Vec<&str> = f4.tokens[span.start..=span.end].iter().map(|t| t.text.as_str()).collect();
    ensure(words == ["wifi", "card"], || format!("offsets after non-ASCII text give {:?}", words))?;
    Ok(format!("{} label and SA/MA counts exact; fixture 4/4/3, SA 2 / MA 9", source))
}

fn random_scores<R: Rng>(rng: &mut R) -> CrfScores {
    let mut s = CrfScores::zeros();
    for row in s.transitions.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
    }
    for v in s.start.iter_mut().chain(s.end.iter_mut()) {
        *v = rng.random_range(-2.0..2.0);
    }
    s
}

fn all_paths(n: usize) -> Vec<BioSequence> {
    let mut paths = vec![vec![]];
    for _ in 0..n {
        paths = paths
            .into_iter()
            .flat_map(|p: Vec<Tag>| {
                Tag::ALL.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    paths.into_iter().map(BioSequence).collect()
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(3);
    let instances = 300;
    let (mut worst_z, mut worst_norm) = (0.0f64, 0.0f64);
    for k in 0..instances {
        let n = 1 + k % 6;
        let em = Tensor::matrix(n, 3, (0..3 * n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let scores = random_scores(&mut rng);
        let z = log_partition(&em, &scores).map_err(e2s)?;
        let (z_ref, best) = brute_force_oracle(&em, &scores).map_err(e2s)?;
        worst_z = worst_z.max((z - z_ref).abs());
        let path = viterbi(&em, &scores).map_err(e2s)?;
        ensure(path == best, || format!("instance {}: viterbi {:?} != {:?}", k, path, best))?;
        let mut total = 0.0;
        for p in all_paths(n) {
            total += (path_score(&em, &p, &scores).map_err(e2s)? - z).exp();
        }
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    ensure(worst_z <= 1e-8, || format!("log-partition error {:e}", worst_z))?;
    ensure(worst_norm <= 1e-8, || format!("normalization error {:e}", worst_norm))?;
    Ok(format!(
        "{} instances n in [1,6]; max |logZ err| {:.1e}, max |sum p - 1| {:.1e}, viterbi exact",
        instances, worst_z, worst_norm
    ))
}

fn random_table(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = rng_from_seed(seed);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_tags<R: Rng>(n: usize, rng: &mut R) -> BioSequence {
    BioSequence((0..n).map(|_| Tag::ALL[rng.random_range(0..3)]).collect())
}

fn criterion_4() -> Outcome {
    const TOL: f64 = 1e-4;
    let opts = GradCheckOptions::extrapolated;
    let mut rng = rng_from_seed(4);
    let mut worst: Vec<(String, f64)> = Vec::new();
    let vocab = 12;
    let d = 6;
    for n in 3..=6usize {
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..vocab)).collect();
        let start = rng.random_range(0..n);
        let end = (start + rng.random_range(0..2)).min(n - 1);
        let span = AspectSpan { start, end };
        let label = Polarity::ALL[rng.random_range(0..3)];
        let tags = random_tags(n, &mut rng);
        let seed = 40 + n as u64;

        let mut store = ParamStore::new();
        let ae_cfg = AeConfig {
            embed_dim: d,
            hidden: 3,
            fine_tune_embeddings: true,
        };
        let ae = AeModel::new(&mut store, "ae", random_table(vocab, d, seed), ae_cfg.clone(), &mut rng_from_seed(seed))
            .map_err(e2s)?;
        let r = grad_check(&mut store, |g| ae.loss(g, &ids, &tags), opts()).map_err(e2s)?;
        worst.push((format!("AE n={}", n), r.max_relative_error));

        for arch in Architecture::ALL {
            let mut store = ParamStore::new();
            let cfg = AlsaConfig {
                hidden: 5,
                ..AlsaConfig::new(arch, d)
            };
            let m = AlsaModel::new(&mut store, "m", cfg, &mut rng_from_seed(seed)).map_err(e2s)?;
            let words = random_table(n, d, seed + 1);
            let r = grad_check(
                &mut store,
                |g| {
                    let x = g.input(words.clone());
                    m.loss(g, x, span, label)
                },
                opts(),
            )
            .map_err(e2s)?;
            worst.push((format!("{} n={}", arch, n), r.max_relative_error));
        }

        let mut store = ParamStore::new();
        let mt = MultitaskModel::new(&mut store, "mt", random_table(vocab, d, seed), ae_cfg, 4, &mut rng_from_seed(seed))
            .map_err(e2s)?;
        let aspects = [(span, label)];
        let r = grad_check(&mut store, |g| mt.loss(g, &ids, Some(&tags), &aspects), opts()).map_err(e2s)?;
        worst.push((format!("multitask n={}", n), r.max_relative_error));
    }
    let (name, err) = worst
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    ensure(err < TOL, || format!("{} relative error {:.2e} >= {:e}", name, err, TOL))?;
    Ok(format!(
        "AE, TC-LSTM, ATAE, IAN, multi-task at n = 3..6: max relative error {:.2e} ({})",
        err, name
    ))
}

fn criterion_5() -> Outcome {
    let d = 300;
    let n = 7;
    let table = random_table(20, d, 50);
    let sample = AlsaSample {
        sentence_id: "s".into(),
        token_ids: vec![3, 1, 4, 1, 5, 9, 2],
        span: AspectSpan { start: 2, end: 3 },
        label: Polarity::Neutral,
        domain: None,
    };
    let mut empty = TransferCache::new();
    empty.insert("s", Tensor::zeros(&[n, 0])).map_err(e2s)?;
    let mut wide = TransferCache::new();
    wide.insert("s", random_table(n, 64, 51)).map_err(e2s)?;
    for arch in Architecture::ALL {
        let mut store = ParamStore::new();
        let cfg = AlsaConfig {
            hidden: 8,
            ..AlsaConfig::new(arch, d)
        };
        let m = AlsaModel::new(&mut store, "m", cfg, &mut rng_from_seed(52)).map_err(e2s)?;
        let (plain, _) = build_input(&sample, &InputMode::Plain, &table).map_err(e2s)?;
        let (t0, _) = build_input(&sample, &InputMode::Transfer(&empty), &table).map_err(e2s)?;
        let a = m.predict(&store, &plain, sample.span).map_err(e2s)?;
        let b = m.predict(&store, &t0, sample.span).map_err(e2s)?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(&a.logits) == bits(&b.logits), || format!("{}: D_T = 0 logits differ", arch))?;

        let (t64, _) = build_input(&sample, &InputMode::Transfer(&wide), &table).map_err(e2s)?;
        ensure(t64.cols() == 364, || format!("{}: transfer input width {}", arch, t64.cols()))?;
        let cfg = AlsaConfig {
            hidden: 8,
            ..AlsaConfig::new(arch, d + wide.width().unwrap())
        };
        ensure(cfg.input_dim == 364, || format!("{}: classifier input {}", arch, cfg.input_dim))?;
        let mut store = ParamStore::new();
        let m = AlsaModel::new(&mut store, "m", cfg, &mut rng_from_seed(52)).map_err(e2s)?;
        m.predict(&store, &t64, sample.span).map_err(e2s)?;
        ensure(m.predict(&store, &plain, sample.span).is_err(), || {
            format!("{}: 300-wide rows accepted by a 364-wide model", arch)
        })?;
    }
    Ok("D_T = 0 logits bit-identical for TC-LSTM, ATAE, IAN; D_T = 64 gives 364-wide input".into())
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    // 10 sentences: 6 single-aspect plus 4 pairs
    let ae_data = common::synth_dataset(&SynthSpec::small(Domain::Laptop, 14, 6, 60));
    ensure(ae_data.len() == 10, || format!("AE corpus has {} sentences", ae_data.len()))?;
    let cfg = ExperimentConfig {
        task: Task::Ae,
        lr: 0.01,
        embed_dim: 20,
        transfer_dim: 16,
        epochs: 500,
        max_steps: Some(500),
        stop_when_fit: true,
        dev_fraction: 0.0,
        seed: 6,
        ..ExperimentConfig::default()
    };
    let data = common::prepared(&cfg, ae_data.clone(), None);
    let out = train_prepared(&cfg, &data).map_err(e2s)?;
    let f1 = tagger_scores(&out.last, &ae_data.ae_examples(&data.vocab)).map_err(e2s)?.f1;
    ensure(f1 == 1.0, || format!("AE span F1 {} after {} steps", f1, out.steps))?;
    notes.push(format!("AE F1 1.0 in {} steps", out.steps));

    let alsa_data = common::synth_dataset(&SynthSpec::small(Domain::Restaurant, 20, 8, 61));
    for arch in Architecture::ALL {
        let cfg = ExperimentConfig {
            task: Task::Alsa,
            architecture: arch,
            lr: 0.01,
            embed_dim: 20,
            alsa_hidden: 32,
            epochs: 2000,
            max_steps: Some(2000),
            stop_when_fit: true,
            dev_fraction: 0.0,
            seed: 6,
            ..ExperimentConfig::default()
        };
        let data = common::prepared(&cfg, alsa_data.clone(), None);
        let out = train_prepared(&cfg, &data).map_err(e2s)?;
        let acc = out.log.last().and_then(|l| l.train_score).unwrap_or(0.0);
        ensure(acc == 100.0, || format!("{} training accuracy {:.1}% after {} steps", arch, acc, out.steps))?;
        notes.push(format!("{} 100% in {} steps", arch, out.steps));
    }
    Ok(notes.join("; "))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let (train_path, test_path) = common::small_corpus(dir.path(), Domain::Laptop, 70);
    let test = Dataset::from_xml_file(&test_path, Domain::Laptop).map_err(e2s)?;
    let mut checked = 0;
    for (task, arch) in [(Task::Alsa, Architecture::Atae), (Task::Alsa, Architecture::Ian), (Task::Multitask, Architecture::Atae)] {
        let cfg = ExperimentConfig {
            architecture: arch,
            epochs: 1,
            ..common::tiny_config(task, &train_path, Some(&test_path))
        };
        let data = absa_core::harness::prepare(&cfg).map_err(e2s)?;
        let bundle = train_prepared(&cfg, &data).map_err(e2s)?.best;
        let records = dump_attention(&bundle, &test, None).map_err(e2s)?;
        for r in &records {
            let s = test.sentences.iter().find(|s| s.id == r.sentence_id).unwrap();
            let expected = match r.head.as_str() {
                "sentence" => s.tokens.len(),
                "aspect" => r.span.len(),
                h => return Err(format!("unknown head {}", h)),
            };
            ensure(r.alpha.len() == expected && r.tokens.len() == expected, || {
                format!("{} {}: alpha length {} for {} tokens", bundle.describe(), r.sentence_id, r.alpha.len(), expected)
            })?;
            ensure(r.alpha.iter().all(|&a| a >= 0.0), || "negative attention weight".into())?;
            let sum: f64 = r.alpha.iter().sum();
            ensure((sum - 1.0).abs() <= 1e-6, || format!("alpha sums to {}", sum))?;
        }
        let heads = if arch == Architecture::Ian { 2 } else { 1 };
        for s in &test.sentences {
            let aspects = s.labelled_aspects().count();
            let got = records.iter().filter(|r| r.sentence_id == s.id && r.head == "sentence").count();
            ensure(got == aspects, || format!("{}: {} records for {} aspects", s.id, got, aspects))?;
        }
        ensure(records.len() == heads * samples(&test).len(), || "record count".into())?;
        checked += records.len();
    }
    ensure(test.sentences.iter().any(|s| s.labelled_aspects().count() > 1), || "no multi-aspect sentence".into())?;

    let cfg = ExperimentConfig {
        architecture: Architecture::TcLstm,
        epochs: 1,
        ..common::tiny_config(Task::Alsa, &train_path, None)
    };
    let data = absa_core::harness::prepare(&cfg).map_err(e2s)?;
    let tc = train_prepared(&cfg, &data).map_err(e2s)?.best;
    let err = dump_attention(&tc, &test, None).err().ok_or("TC-LSTM dump did not fail")?;
    ensure(err.to_string().contains("no attention to dump"), || format!("TC-LSTM error: {}", err))?;
    Ok(format!(
        "{} records from ATAE, IAN, multi-task: alpha >= 0, sums within 1e-6, lengths match; one record per aspect; TC-LSTM refused",
        checked
    ))
}

fn files_equal(a: &Path, b: &Path) -> Result<(), String> {
    let x = std::fs::read(a).map_err(e2s)?;
    let y = std::fs::read(b).map_err(e2s)?;
    ensure(x == y, || format!("{} and {} differ", a.display(), b.display()))
}

fn run_twice(cfg: &ExperimentConfig, dir: &Path, name: &str) -> Result<(), String> {
    let mut files = Vec::new();
    for k in 0..2 {
        let mut c = cfg.clone();
        c.output = Some(dir.join(format!("run{}", k)).join(name));
        let (_, f) = train(&c).map_err(e2s)?;
        files.push(f.unwrap());
    }
    let (a, b): (&RunFiles, &RunFiles) = (&files[0], &files[1]);
    for (x, y) in [(&a.best, &b.best), (&a.last, &b.last), (&a.log, &b.log)] {
        files_equal(x, y)?;
    }
    files_equal(&absa_core::harness::meta_path(&a.best), &absa_core::harness::meta_path(&b.best))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let (train_path, test_path) = common::small_corpus(dir.path(), Domain::Restaurant, 80);
    let ae_cfg = common::tiny_config(Task::Ae, &train_path, Some(&test_path));
    run_twice(&ae_cfg, dir.path(), "ae")?;

    let ae = absa_core::harness::ModelBundle::load(&dir.path().join("run0/ae.best.ckpt")).map_err(e2s)?;
    let train_set = Dataset::from_xml_file(&train_path, Domain::Restaurant).map_err(e2s)?;
    let test_set = Dataset::from_xml_file(&test_path, Domain::Restaurant).map_err(e2s)?;
    let st = dir.path().join("st.ckpt");
    export_st(&ae, &[&train_set, &test_set]).map_err(e2s)?.save(&st).map_err(e2s)?;

    let mut runs = 1;
    for (arch, input) in [
        (Architecture::TcLstm, InputKind::Plain),
        (Architecture::Atae, InputKind::Noise),
        (Architecture::Ian, InputKind::Transfer),
    ] {
        let cfg = ExperimentConfig {
            architecture: arch,
            input,
            st_cache: Some(st.clone()),
            ..common::tiny_config(Task::Alsa, &train_path, Some(&test_path))
        };
        run_twice(&cfg, dir.path(), &format!("{}-{}", arch, input))?;
        runs += 1;
    }
    run_twice(&common::tiny_config(Task::Multitask, &train_path, None), dir.path(), "mt")?;
    runs += 1;
    Ok(format!(
        "{} configurations (tagger, TC-LSTM, ATAE-R, IAN-T, multi-task) trained twice: checkpoints, metadata and logs byte-identical",
        runs
    ))
}

fn criterion_9() -> Outcome {
    let m = noise_rows("sentence-1", 100, 100, 9).map_err(e2s)?;
    let v = m.data();
    ensure(v.len() == 10_000, || format!("{} entries", v.len()))?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    ensure(mean > -0.05 && mean < 0.05, || format!("mean {}", mean))?;
    ensure(std > 0.97 && std < 1.03, || format!("std {}", std))?;
    ensure(noise_rows("sentence-1", 100, 100, 9).map_err(e2s)? == m, || "same seed differs".into())?;
    ensure(noise_rows("sentence-2", 100, 100, 9).map_err(e2s)? != m, || "sentence id ignored".into())?;
    ensure(noise_rows("sentence-1", 100, 100, 10).map_err(e2s)? != m, || "seed ignored".into())?;
    Ok(format!("10,000 entries: mean {:.4}, std {:.4}; reproducible per (seed, sentence)", mean, std))
}

fn criterion_10() -> Outcome {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&readme).map_err(|e| format!("README: {}", e))?;
    ensure(text.contains("not acceptance-gated"), || "README lacks the non-reproducibility note".into())?;
    Ok("trained-model F1 values are documented as not acceptance-gated (informational)".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("majority baseline", criterion_1, Duration::from_secs(1)),
        ("ingestion counts", criterion_2, Duration::from_secs(10)),
        ("CRF oracle suite", criterion_3, Duration::from_secs(30)),
        ("gradient suite", criterion_4, Duration::from_secs(120)),
        ("transfer reduction", criterion_5, Duration::from_secs(10)),
        ("overfit suite", criterion_6, Duration::from_secs(180)),
        ("attention validity", criterion_7, Duration::from_secs(10)),
        ("determinism", criterion_8, Duration::from_secs(120)),
        ("noise statistics", criterion_9, Duration::from_secs(5)),
        ("non-reproducibility note", criterion_10, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > *limit => Err(format!("{} but took {:.2?} (limit {:?})", detail, elapsed, limit)),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {}: {} [{:.2?}]", i + 1, name, detail, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {}: {} [{:.2?}]", i + 1, name, why, elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
