use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use actionspotter::baselines::{read_detections, redraw_detections};
use actionspotter::dataset::{
    predictions_to_jsonl, read_annotations, read_feature_file, read_predictions,
    synth_generate, write_predictions, Dataset, SynthConfig, Video,
};
use actionspotter::env::EpisodeTrace;
use actionspotter::metric::{evaluate_spots, MapReport};
use actionspotter::nn::Checkpoint;
use actionspotter::trainer::{evaluate, train, EpochRecord, TrainOutcome};
use actionspotter::Error;
use anyhow::{Context, Result};

use crate::config::TrainConfig;
use crate::Globals;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_REPORT_FILE: &str = "train_report.csv";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const TRACES_FILE: &str = "traces.json";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const CONFIG_FILE: &str = "config.json";

/// Creates `dir`, refusing a non-empty one unless `force` is set.
pub fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            ))
            .into());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn require_out(g: &Globals) -> Result<&Path> {
    g.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required".into()).into())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_train_report(records: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains with the config at `config` and writes the run artifacts into
/// the output directory.
pub fn cmd_train(config: &Path, g: &Globals) -> Result<TrainOutcome> {
    let out = require_out(g)?;
    let mut cfg = TrainConfig::load(config)?;
    if let Some(seed) = g.seed {
        cfg = cfg.with_seed(seed);
    }
    prepare_out(out, g.force)?;
    train_into(&cfg, out)
}

/// Trains `cfg` and writes checkpoint, epoch report, validation
/// predictions, traces and metric report into `out`.
pub fn train_into(cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let (train_set, val) = cfg.load_data()?;
    let outcome = train(&train_set, &val, &cfg.actions, &cfg.hyper)?;
    write_outcome(cfg, &outcome, &val, out)?;
    Ok(outcome)
}

/// Writes the artifacts of a finished training run.
pub fn write_outcome(cfg: &TrainConfig, outcome: &TrainOutcome, val: &Dataset, out: &Path) -> Result<()> {
    write_text(&out.join(CONFIG_FILE), &serde_json::to_string_pretty(cfg)?)?;
    outcome.best.save(out.join(CHECKPOINT_FILE))?;
    write_train_report(&outcome.report, &out.join(TRAIN_REPORT_FILE))?;
    let eval = evaluate(&outcome.best, val)?;
    write_predictions(&eval.predictions, out.join(PREDICTIONS_FILE))?;
    write_traces(&eval.traces, &out.join(TRACES_FILE))?;
    write_text(
        &out.join(EVAL_REPORT_FILE),
        &serde_json::to_string_pretty(&eval.report)?,
    )
}

#[derive(Debug, Clone)]
pub enum EvalSource {
    Predictions(PathBuf),
    Checkpoint {
        ckpt: PathBuf,
        features: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: MapReport,
    /// Present when a checkpoint was run.
    pub skip_ratio: Option<f64>,
}

/// Annotations at `gt` joined with their feature files.
pub fn load_annotated(gt: &Path, features: &Path) -> Result<Dataset> {
    let set = read_annotations(gt)?;
    let videos = set
        .videos
        .into_iter()
        .map(|annotation| {
            let features = read_feature_file(features.join(format!("{}.aspt", annotation.id)))?;
            Ok(Video {
                features,
                annotation,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let data = Dataset {
        num_classes: set.num_classes,
        videos,
    };
    data.validate()?;
    Ok(data)
}

pub fn cmd_eval(gt: &Path, source: &EvalSource, g: &Globals) -> Result<EvalOutput> {
    let (output, predictions, traces) = match source {
        EvalSource::Predictions(pred) => {
            let gts = read_annotations(gt)?;
            let preds = read_predictions(pred)?;
            let report = evaluate_spots(&preds, &gts)?;
            (EvalOutput { report, skip_ratio: None }, None, None)
        }
        EvalSource::Checkpoint { ckpt, features } => {
            let dir = match features {
                Some(f) => f.clone(),
                None => gt.parent().unwrap_or(Path::new(".")).join("features"),
            };
            let data = load_annotated(gt, &dir)?;
            let ckpt = Checkpoint::load(ckpt)?;
            let eval = evaluate(&ckpt, &data)?;
            let out = EvalOutput {
                report: eval.report,
                skip_ratio: Some(eval.skip_ratio),
            };
            (out, Some(eval.predictions), Some(eval.traces))
        }
    };
    if let Some(out) = &g.out {
        prepare_out(out, g.force)?;
        write_text(
            &out.join(EVAL_REPORT_FILE),
            &serde_json::to_string_pretty(&output.report)?,
        )?;
        if let Some(p) = predictions {
            write_predictions(&p, out.join(PREDICTIONS_FILE))?;
        }
        if let Some(t) = traces {
            write_traces(&t, &out.join(TRACES_FILE))?;
        }
    }
    Ok(output)
}

fn write_traces(traces: &[EpisodeTrace], path: &Path) -> Result<()> {
    write_text(path, &serde_json::to_string(traces)?)
}

pub fn format_eval(out: &EvalOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mAP {:.6}", out.report.map);
    if let Some(skip) = out.skip_ratio {
        let _ = writeln!(s, "skip ratio {skip:.4}");
    }
    for c in &out.report.per_class {
        let _ = writeln!(
            s,
            "class {:>3}  AP {:.6}  gt {:>4}  spots {:>6}",
            c.label, c.ap, c.num_gt, c.num_spots
        );
    }
    s
}

/// Converts detections to spots; writes `predictions.jsonl` into the
/// output directory or prints it when no directory is given.
pub fn cmd_redraw(detections: &Path, g: &Globals) -> Result<()> {
    let segments = read_detections(detections)?;
    let preds = redraw_detections(&segments)?;
    match &g.out {
        Some(out) => {
            prepare_out(out, g.force)?;
            write_predictions(&preds, out.join(PREDICTIONS_FILE))?;
        }
        None => print!("{}", predictions_to_jsonl(&preds)?),
    }
    Ok(())
}

/// Writes `train/` and `val/` dataset directories plus the generator
/// settings used.
pub fn cmd_synth(config: Option<&Path>, g: &Globals) -> Result<()> {
    let out = require_out(g)?;
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<SynthConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let data = synth_generate(&cfg)?;
    prepare_out(out, g.force)?;
    data.train.save(out.join("train"))?;
    data.val.save(out.join("val"))?;
    write_text(&out.join("synth_config.json"), &serde_json::to_string_pretty(&cfg)?)
}
