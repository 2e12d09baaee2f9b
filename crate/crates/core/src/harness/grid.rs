use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use super::evaluate::{evaluate, export_st};
use super::metrics::MetricsReport;
use super::model::ModelBundle;
use super::train::{prepare, train_prepared, PreparedData};
use crate::alsa::{Architecture, InputKind};
use crate::data::Domain;
use crate::error::{Error, Result};

/// Keys that change the prepared inputs and so cannot vary inside one sweep.
const DATA_KEYS: [&str; 7] = [
    "train_data",
    "test_data",
    "embeddings",
    "embed_dim",
    "st_cache",
    "test_st_cache",
    "task",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// The `(key, value)` assignments of this grid point.
    pub point: Vec<(String, String)>,
    pub lr: f64,
    pub l2_lambda: f64,
    pub dev_score: Option<f64>,
    pub best_epoch: Option<usize>,
    pub steps: usize,
    pub error: Option<String>,
}

/// Every assignment of the Cartesian product, first key varying slowest.
pub fn grid_points(grid: &[(String, Vec<String>)]) -> Result<Vec<Vec<(String, String)>>> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidArgument("grid must name at least one key, each with at least one value".into()));
    }
    let mut points = vec![Vec::new()];
    for (k, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p: Vec<(String, String)>| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Parses `key=v1,v2,...` items.
pub fn parse_grid<S: AsRef<str>>(items: &[S]) -> Result<Vec<(String, Vec<String>)>> {
    items
        .iter()
        .map(|s| {
            let s = s.as_ref();
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid item `{}` is not key=v1,v2", s)))?;
            Ok((k.trim().to_string(), v.split(',').map(|x| x.trim().to_string()).collect()))
        })
        .collect()
}

/// Dev score descending (missing scores last), then lower l2, then lower lr.
pub fn rank(results: &mut [GridResult]) {
    results.sort_by(|a, b| {
        let score = match (a.dev_score, b.dev_score) {
            (Some(x), Some(y)) => y.partial_cmp(&x).unwrap_or(Ordering::Equal),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        score
            .then(a.l2_lambda.total_cmp(&b.l2_lambda))
            .then(a.lr.total_cmp(&b.lr))
    });
}

/// Trains one model per grid point on shared data, in parallel, and ranks them.
/// A failing point is recorded with its error.
pub fn grid_search_prepared(
    template: &ExperimentConfig,
    grid: &[(String, Vec<String>)],
    data: &PreparedData,
) -> Result<Vec<GridResult>> {
    for (k, _) in grid {
        let k = k.replace('-', "_");
        if DATA_KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!("`{}` cannot vary inside a grid search", k)));
        }
    }
    let points = grid_points(grid)?;
    let mut results: Vec<GridResult> = points
        .into_par_iter()
        .map(|point| {
            let mut cfg = template.clone();
            let run = point
                .iter()
                .try_for_each(|(k, v)| cfg.set(k, v))
                .and_then(|_| train_prepared(&cfg, data));
            let mut r = GridResult {
                point,
                lr: cfg.lr,
                l2_lambda: cfg.l2_lambda,
                dev_score: None,
                best_epoch: None,
                steps: 0,
                error: None,
            };
            match run {
                Ok(out) => {
                    r.dev_score = out.best.meta.dev_score;
                    r.best_epoch = out.best.meta.epoch;
                    r.steps = out.steps;
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            r
        })
        .collect();
    rank(&mut results);
    Ok(results)
}

pub fn grid_search(template: &ExperimentConfig, grid: &[(String, Vec<String>)]) -> Result<Vec<GridResult>> {
    grid_points(grid)?;
    let data = prepare(template)?;
    grid_search_prepared(template, grid, &data)
}

pub fn grid_table(results: &[GridResult]) -> String {
    let mut out = format!("{:<4} {:>10} {:>10} {:>9} {:>6}  point\n", "rank", "lr", "l2", "dev-F1", "epoch");
    for (i, r) in results.iter().enumerate() {
        let point: Vec<String> = r.point.iter().map(|(k, v)| format!("{}={}", k, v)).collect();
        let score = match (&r.error, r.dev_score) {
            (Some(_), _) => "failed".to_string(),
            (None, Some(s)) => format!("{:.2}", s),
            (None, None) => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<4} {:>10} {:>10} {:>9} {:>6}  {}\n",
            i + 1,
            r.lr,
            r.l2_lambda,
            score,
            r.best_epoch.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
            point.join(" ")
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainReport {
    pub ae_domain: Domain,
    pub alsa_domain: Domain,
    pub architecture: Architecture,
    pub transfer_dim: usize,
    pub dev_score: Option<f64>,
    pub test: MetricsReport,
}

/// Exports S_T with `ae` over the classifier data, then trains and tests a
/// transfer classifier. `cfg` supplies the architecture and training settings.
pub fn cross_domain_run(cfg: &ExperimentConfig, ae: &ModelBundle, data: &PreparedData) -> Result<CrossDomainReport> {
    let ae_model = ae.ae()?;
    let test = data
        .test
        .as_ref()
        .ok_or_else(|| Error::Config("cross-domain run needs test_data".into()))?;
    let cache = export_st(ae, &[&data.train, test])?;
    let mut data = data.clone();
    data.transfer = Some(cache);
    data.test_transfer = None;
    let mut cfg = cfg.clone();
    cfg.task = Task::Alsa;
    cfg.input = InputKind::Transfer;
    cfg.ae_domain = Some(ae.meta.domain);
    let out = train_prepared(&cfg, &data)?;
    let report = evaluate(&out.best, test, Some(cfg.architecture), data.transfer.as_ref())?;
    Ok(CrossDomainReport {
        ae_domain: ae.meta.domain,
        alsa_domain: cfg.domain,
        architecture: cfg.architecture,
        transfer_dim: ae_model.transfer_dim(),
        dev_score: out.best.meta.dev_score,
        test: report,
    })
}

/// Loads the tagger named by `cfg.ae_checkpoint` and runs one cell.
pub fn cross_domain_from_config(cfg: &ExperimentConfig) -> Result<CrossDomainReport> {
    let path = cfg
        .ae_checkpoint
        .as_deref()
        .ok_or_else(|| Error::Config("cross-domain run needs ae_checkpoint".into()))?;
    let ae = ModelBundle::load(path)?;
    if let Some(d) = cfg.ae_domain {
        if d != ae.meta.domain {
            return Err(Error::Config(format!(
                "ae_domain is {} but the checkpoint was trained on {}",
                d, ae.meta.domain
            )));
        }
    }
    let mut plain = cfg.clone();
    plain.task = Task::Alsa;
    plain.input = InputKind::Plain;
    let data = prepare(&plain)?;
    cross_domain_run(cfg, &ae, &data)
}

/// Every (tagger, classifier data, architecture) cell, in parallel. Cells are
/// returned tagger-major, then data, then architecture.
pub fn cross_domain_grid(
    template: &ExperimentConfig,
    taggers: &[ModelBundle],
    datasets: &[(Domain, PreparedData)],
    architectures: &[Architecture],
) -> Vec<Result<CrossDomainReport>> {
    let mut cells = Vec::new();
    for ae in taggers {
        for (domain, data) in datasets {
            for &arch in architectures {
                cells.push((ae, *domain, data, arch));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(ae, domain, data, arch)| {
            let mut cfg = template.clone();
            cfg.domain = domain;
            cfg.architecture = arch;
            cross_domain_run(&cfg, ae, data)
        })
        .collect()
}
