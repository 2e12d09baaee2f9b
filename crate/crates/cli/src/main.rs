use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use absa_core::alsa::{Architecture, TransferCache};
use absa_core::data::synth::{generate, to_xml, Split, SynthSpec};
use absa_core::data::{Dataset, Domain};
use absa_core::harness::{
    cross_domain_grid, dump_attention, evaluate, export_st, grid_search, grid_table, load_dataset, majority_report,
    parse_grid, prepare, train, ExperimentConfig, ModelBundle, PreparedData, Task,
};
use absa_core::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "absa", version, about = "Aspect extraction, aspect-level sentiment and AE-to-ALSA transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the BiGRU-CRF aspect extractor.
    TrainAe(ConfigArgs),
    /// Export transfer representations (S_T) of every sentence in the given datasets.
    ExportSt {
        /// Tagger checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset files (XML or JSONL); repeat for several.
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "laptop")]
        domain: Domain,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a sentiment classifier (or the multi-task model with `--task multitask`).
    TrainAlsa(ConfigArgs),
    /// Evaluate a classifier checkpoint with SA/MA slices.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "laptop")]
        domain: Domain,
        /// Fail unless the checkpoint holds this architecture.
        #[arg(long)]
        architecture: Option<Architecture>,
        #[arg(long)]
        st_cache: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Train one model per grid point and rank them by dev score.
    GridSearch {
        #[command(flatten)]
        config: ConfigArgs,
        /// `key=v1,v2,...`; repeat for each swept key.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Transfer classifiers fed by taggers of either domain.
    CrossDomain {
        #[command(flatten)]
        config: ConfigArgs,
        /// Tagger checkpoints; each is paired with every architecture.
        #[arg(long = "tagger", required = true)]
        taggers: Vec<PathBuf>,
        /// Comma-separated architectures.
        #[arg(long, default_value = "tclstm,atae,ian")]
        architectures: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Write attention weights of an ATAE, IAN or multi-task checkpoint as JSONL.
    DumpAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "laptop")]
        domain: Domain,
        #[arg(long)]
        st_cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Majority-class baseline.
    Majority {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "laptop")]
        domain: Domain,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Convert a SemEval XML file into the JSONL dataset form.
    Prepare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "laptop")]
        domain: Domain,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic SemEval-style XML corpus.
    Synth {
        #[arg(long, default_value = "laptop")]
        domain: Domain,
        /// Reproduce the SemEval split's label and SA/MA counts.
        #[arg(long, value_parser = parse_split, conflicts_with = "aspects")]
        split: Option<Split>,
        /// Number of labelled aspects for a small corpus.
        #[arg(long)]
        aspects: Option<usize>,
        /// Single-aspect count for a small corpus (default: half).
        #[arg(long)]
        single: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Prefix of generated sentence ids (default: domain and split).
        #[arg(long)]
        id_prefix: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split `{}`", s)),
    }
}

#[derive(Args, Clone, Debug, Default)]
struct OutputArgs {
    /// Print one JSON record instead of the table.
    #[arg(long)]
    json: bool,
    /// Append JSON records to this file.
    #[arg(long)]
    records: Option<PathBuf>,
}

/// Flags mirroring the experiment configuration; they override `--config`.
#[derive(Args, Clone, Debug, Default)]
struct ConfigArgs {
    /// `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set")]
    set: Vec<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    architecture: Option<String>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    ae_domain: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    l2_lambda: Option<String>,
    #[arg(long)]
    transfer_dim: Option<String>,
    #[arg(long)]
    alsa_hidden: Option<String>,
    #[arg(long)]
    attn_dim: Option<String>,
    #[arg(long)]
    embed_dim: Option<String>,
    #[arg(long)]
    fine_tune_embeddings: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    #[arg(long)]
    stop_when_fit: Option<String>,
    #[arg(long)]
    dev_fraction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    train_data: Option<String>,
    #[arg(long)]
    test_data: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    st_cache: Option<String>,
    #[arg(long)]
    test_st_cache: Option<String>,
    #[arg(long)]
    ae_checkpoint: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Use the tuned learning rate and L2 for this architecture, input and domain.
    #[arg(long)]
    tuned_optimum: bool,
}

impl ConfigArgs {
    fn resolve(&self, task: Option<Task>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_kv_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = task {
            cfg.task = t;
        }
        let flags = [
            ("task", &self.task),
            ("architecture", &self.architecture),
            ("input", &self.input),
            ("domain", &self.domain),
            ("ae_domain", &self.ae_domain),
            ("lr", &self.lr),
            ("l2_lambda", &self.l2_lambda),
            ("transfer_dim", &self.transfer_dim),
            ("alsa_hidden", &self.alsa_hidden),
            ("attn_dim", &self.attn_dim),
            ("embed_dim", &self.embed_dim),
            ("fine_tune_embeddings", &self.fine_tune_embeddings),
            ("epochs", &self.epochs),
            ("max_steps", &self.max_steps),
            ("stop_when_fit", &self.stop_when_fit),
            ("dev_fraction", &self.dev_fraction),
            ("seed", &self.seed),
            ("train_data", &self.train_data),
            ("test_data", &self.test_data),
            ("embeddings", &self.embeddings),
            ("st_cache", &self.st_cache),
            ("test_st_cache", &self.test_st_cache),
            ("ae_checkpoint", &self.ae_checkpoint),
            ("output", &self.output),
        ];
        if self.tuned_optimum {
            for (k, v) in &flags[..5] {
                if let Some(v) = v {
                    cfg.set(k, v)?;
                }
            }
            cfg = cfg.with_tuned_optimum();
        }
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set `{}` is not key=value", kv)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn append_records(path: &Path, records: &[serde_json::Value]) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    for r in records {
        writeln!(f, "{}", r).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn emit(out: &OutputArgs, table: &str, records: Vec<serde_json::Value>) -> Result<()> {
    if out.json {
        for r in &records {
            println!("{}", r);
        }
    } else {
        print!("{}", table);
    }
    if let Some(p) = &out.records {
        append_records(p, &records)?;
    }
    Ok(())
}

fn load_cache(path: &Option<PathBuf>) -> Result<Option<TransferCache>> {
    path.as_deref().map(TransferCache::load).transpose()
}

fn run_train(args: &ConfigArgs, default_task: Task) -> Result<()> {
    let mut cfg = args.resolve(None)?;
    match (default_task, cfg.task) {
        (Task::Ae, Task::Ae) | (Task::Alsa, Task::Alsa | Task::Multitask) => {}
        (Task::Ae, other) if args.task.is_some() => {
            return Err(Error::Config(format!("train-ae cannot train task `{}`", other)))
        }
        (t, _) => cfg.task = t,
    }
    if cfg.output.is_none() {
        return Err(Error::Config("output is required".into()));
    }
    let (outcome, files) = train(&cfg)?;
    for l in &outcome.log {
        println!("{}", serde_json::to_string(l)?);
    }
    let files = files.expect("output set");
    println!(
        "{}",
        json!({
            "best_checkpoint": files.best,
            "final_checkpoint": files.last,
            "log": files.log,
            "best_epoch": outcome.best.meta.epoch,
            "best_dev_score": outcome.best.meta.dev_score,
            "steps": outcome.steps,
        })
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainAe(args) => run_train(&args, Task::Ae),
        Command::TrainAlsa(args) => run_train(&args, Task::Alsa),
        Command::ExportSt {
            checkpoint,
            data,
            domain,
            out,
        } => {
            let ae = ModelBundle::load(&checkpoint)?;
            let sets = data
                .iter()
                .map(|p| load_dataset(p, domain))
                .collect::<Result<Vec<Dataset>>>()?;
            let refs: Vec<&Dataset> = sets.iter().collect();
            let cache = export_st(&ae, &refs)?;
            cache.save(&out)?;
            println!(
                "{}",
                json!({"out": out, "sentences": cache.len(), "width": cache.width()})
            );
            Ok(())
        }
        Command::Eval {
            checkpoint,
            data,
            domain,
            architecture,
            st_cache,
            out,
        } => {
            let bundle = ModelBundle::load(&checkpoint)?;
            let dataset = load_dataset(&data, domain)?;
            let cache = load_cache(&st_cache)?;
            let report = evaluate(&bundle, &dataset, architecture, cache.as_ref())?;
            let record = json!({
                "checkpoint": checkpoint,
                "model": bundle.describe(),
                "input": bundle.meta.input,
                "data": data,
                "report": report,
            });
            emit(&out, &report.to_table(), vec![record])
        }
        Command::GridSearch { config, grid, out } => {
            let cfg = config.resolve(None)?;
            let grid = parse_grid(&grid)?;
            let results = grid_search(&cfg, &grid)?;
            let records = results.iter().map(|r| serde_json::to_value(r)).collect::<std::result::Result<_, _>>()?;
            emit(&out, &grid_table(&results), records)
        }
        Command::CrossDomain {
            config,
            taggers,
            architectures,
            out,
        } => {
            let mut cfg = config.resolve(Some(Task::Alsa))?;
            cfg.input = absa_core::alsa::InputKind::Plain;
            let archs = architectures
                .split(',')
                .map(|a| a.trim().parse::<Architecture>())
                .collect::<Result<Vec<_>>>()?;
            let taggers = taggers
                .iter()
                .map(|p| ModelBundle::load(p))
                .collect::<Result<Vec<_>>>()?;
            let data: PreparedData = prepare(&cfg)?;
            let cells = cross_domain_grid(&cfg, &taggers, &[(cfg.domain, data)], &archs);
            let mut table = format!("{:<11} {:<11} {:<7} {:>9} {:>9} {:>9}\n", "ae", "alsa", "arch", "test-F1", "SA-F1", "MA-F1");
            let mut records = Vec::new();
            let mut failed = 0;
            for cell in cells {
                match cell {
                    Ok(r) => {
                        let f = |s: &Option<absa_core::harness::Scores>| {
                            s.as_ref().map(|s| format!("{:.2}", s.macro_f1)).unwrap_or_else(|| "-".into())
                        };
                        table.push_str(&format!(
                            "{:<11} {:<11} {:<7} {:>9.2} {:>9} {:>9}\n",
                            r.ae_domain.as_str(),
                            r.alsa_domain.as_str(),
                            r.architecture.to_string(),
                            r.test.macro_f1(),
                            f(&r.test.sa),
                            f(&r.test.ma)
                        ));
                        records.push(serde_json::to_value(&r)?);
                    }
                    Err(e) => {
                        failed += 1;
                        table.push_str(&format!("failed: {}\n", e));
                        records.push(json!({"error": e.kind(), "message": e.to_string()}));
                    }
                }
            }
            emit(&out, &table, records)?;
            if failed > 0 {
                return Err(Error::InvalidArgument(format!("{} cross-domain cell(s) failed", failed)));
            }
            Ok(())
        }
        Command::DumpAttention {
            checkpoint,
            data,
            domain,
            st_cache,
            out,
        } => {
            let bundle = ModelBundle::load(&checkpoint)?;
            let dataset = load_dataset(&data, domain)?;
            let cache = load_cache(&st_cache)?;
            let records = dump_attention(&bundle, &dataset, cache.as_ref())?;
            absa_core::harness::write_jsonl(&out, &records)?;
            println!("{}", json!({"out": out, "records": records.len()}));
            Ok(())
        }
        Command::Majority { train, test, domain, out } => {
            let train_set = load_dataset(&train, domain)?;
            let test_set = load_dataset(&test, domain)?;
            let report = majority_report(&train_set, &test_set)?;
            let record = json!({
                "domain": domain,
                "macro_f1": format!("{:.2}", report.macro_f1()),
                "report": report,
            });
            emit(&out, &report.to_table(), vec![record])
        }
        Command::Prepare { data, domain, out } => {
            let d = Dataset::from_xml_file(&data, domain)?;
            d.save_jsonl(&out)?;
            println!("{}", json!({"out": out, "sentences": d.len(), "labels": d.label_counts()}));
            Ok(())
        }
        Command::Synth {
            domain,
            split,
            aspects,
            single,
            seed,
            id_prefix,
            out,
        } => {
            let mut spec = match (split, aspects) {
                (Some(s), _) => SynthSpec::semeval(domain, s, seed),
                (None, Some(n)) => SynthSpec::small(domain, n, single.unwrap_or(n / 2), seed),
                (None, None) => return Err(Error::Config("synth needs --split or --aspects".into())),
            };
            if let Some(p) = id_prefix {
                spec.id_prefix = p;
            }
            let sentences = generate(&spec)?;
            std::fs::write(&out, to_xml(&sentences)).map_err(|e| io_error(&out, e))?;
            println!("{}", json!({"out": out, "sentences": sentences.len(), "labels": spec.labels}));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
