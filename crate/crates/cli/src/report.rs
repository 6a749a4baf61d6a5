//! The `report` command: runs every (run, seed) job of a manifest, or
//! collects its result when the job directory already holds one, then
//! writes the result tables and the mAP versus viewed-fraction figure.

use std::fs;
use std::path::{Path, PathBuf};

use actionspotter::baselines::{no_memory_variant, supervised_actionspotter, FrameModel, FrameModelKind};
use actionspotter::dataset::write_predictions;
use actionspotter::metric::evaluate_spots;
use actionspotter::trainer::train;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::commands::{prepare_out, write_outcome, write_text, CONFIG_FILE, EVAL_REPORT_FILE, PREDICTIONS_FILE};
use crate::config::{ExperimentManifest, ManifestRun, Method, TrainConfig};
use crate::svg::{line_chart, Series};
use crate::Globals;

pub const JOB_FILE: &str = "job.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVE_FILE: &str = "curve.svg";

/// Outcome of one (run, seed) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub run: String,
    pub series: String,
    pub method: Method,
    pub seed: u64,
    pub gamma: f64,
    /// Browse displacements joined with `+`.
    pub actions: String,
    pub map: f64,
    pub skip_ratio: f64,
    pub best_epoch: usize,
}

/// Mean over seeds of one manifest run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub series: String,
    pub method: Method,
    pub seeds: usize,
    pub mean_map: f64,
    pub std_map: f64,
    pub mean_skip_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub jobs: Vec<JobResult>,
    pub summary: Vec<RunSummary>,
    pub out: PathBuf,
}

pub fn cmd_report(manifest: &Path, g: &Globals) -> Result<Report> {
    let (m, base) = ExperimentManifest::load(manifest)?;
    let out = match &g.out {
        Some(o) => o.clone(),
        None => base.join(&m.output),
    };
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut jobs = Vec::new();
    for run in &m.runs {
        let cfg = m.run_config(run, &base)?;
        for &seed in &run.seeds {
            let dir = out.join(&run.name).join(format!("seed-{seed}"));
            let job_file = dir.join(JOB_FILE);
            if job_file.exists() && !g.force {
                let text = fs::read_to_string(&job_file)?;
                jobs.push(serde_json::from_str(&text).with_context(|| format!("{}", job_file.display()))?);
                continue;
            }
            prepare_out(&dir, g.force)?;
            let job = run_job(run, &cfg.clone().with_seed(seed), seed, &dir)?;
            write_text(&job_file, &serde_json::to_string_pretty(&job)?)?;
            jobs.push(job);
        }
    }

    let summary = summarize(&m.runs, &jobs);
    write_csv(&jobs, &out.join(RESULTS_FILE))?;
    write_csv(&summary, &out.join(SUMMARY_FILE))?;
    write_text(&out.join(CURVE_FILE), &curve(&m.name, &summary))?;
    Ok(Report { jobs, summary, out })
}

/// Trains one job and writes its artifacts into `dir`.
pub fn run_job(run: &ManifestRun, cfg: &TrainConfig, seed: u64, dir: &Path) -> Result<JobResult> {
    let (train_set, val) = cfg.load_data()?;
    let hp = &cfg.hyper;
    let (map, skip_ratio, best_epoch) = match run.method {
        Method::Actionspotter | Method::Supervised | Method::NoMemory => {
            let outcome = match run.method {
                Method::Supervised => supervised_actionspotter(&train_set, &val, hp)?,
                Method::NoMemory => train(&train_set, &val, &cfg.actions, &no_memory_variant(hp))?,
                _ => train(&train_set, &val, &cfg.actions, hp)?,
            };
            write_outcome(cfg, &outcome, &val, dir)?;
            (outcome.val_map, outcome.val_skip_ratio, outcome.best_epoch)
        }
        Method::Naive | Method::Multitask => {
            let kind = if run.method == Method::Naive {
                FrameModelKind::Naive
            } else {
                FrameModelKind::Multitask
            };
            let outcome = FrameModel::train(kind, &train_set, &val, hp)?;
            write_text(&dir.join(CONFIG_FILE), &serde_json::to_string_pretty(cfg)?)?;
            write_predictions(&outcome.val_predictions, dir.join(PREDICTIONS_FILE))?;
            let report = evaluate_spots(&outcome.val_predictions, &val.annotations())?;
            write_text(&dir.join(EVAL_REPORT_FILE), &serde_json::to_string_pretty(&report)?)?;
            let best = outcome
                .history
                .iter()
                .filter(|h| h.2 == outcome.val_map)
                .map(|h| h.0)
                .next()
                .unwrap_or(0);
            (outcome.val_map, 0.0, best)
        }
    };
    let actions = match run.method {
        Method::Supervised => "1".to_string(),
        Method::Naive | Method::Multitask => "all".to_string(),
        _ => join_actions(cfg.actions.displacements()),
    };
    Ok(JobResult {
        run: run.name.clone(),
        series: run.series.clone(),
        method: run.method,
        seed,
        gamma: hp.gamma,
        actions,
        map,
        skip_ratio,
        best_epoch,
    })
}

fn join_actions(d: &[usize]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("+")
}

/// Per-run means in manifest order. The spread is the population standard
/// deviation over seeds.
pub fn summarize(runs: &[ManifestRun], jobs: &[JobResult]) -> Vec<RunSummary> {
    runs.iter()
        .filter_map(|r| {
            let js: Vec<&JobResult> = jobs.iter().filter(|j| j.run == r.name).collect();
            if js.is_empty() {
                return None;
            }
            let n = js.len() as f64;
            let mean_map = js.iter().map(|j| j.map).sum::<f64>() / n;
            let var = js.iter().map(|j| (j.map - mean_map).powi(2)).sum::<f64>() / n;
            Some(RunSummary {
                run: r.name.clone(),
                series: r.series.clone(),
                method: r.method,
                seeds: js.len(),
                mean_map,
                std_map: var.sqrt(),
                mean_skip_ratio: js.iter().map(|j| j.skip_ratio).sum::<f64>() / n,
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One polyline per series through its runs' (viewed fraction, mean mAP)
/// points, sorted by viewed fraction.
fn curve(title: &str, summary: &[RunSummary]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for s in summary {
        let point = (1.0 - s.mean_skip_ratio, s.mean_map);
        match series.iter_mut().find(|x| x.name == s.series) {
            Some(x) => x.points.push(point),
            None => series.push(Series {
                name: s.series.clone(),
                points: vec![point],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    line_chart(title, "fraction of frames viewed", "mAP", &series)
}
