//! Training configuration and experiment manifests.
//!
//! Relative paths inside a config or manifest resolve against the
//! directory of the file that names them.

use std::fs;
use std::path::{Path, PathBuf};

use actionspotter::dataset::{synth_generate, Dataset, SynthConfig};
use actionspotter::env::BrowseActionSet;
use actionspotter::trainer::HyperParams;
use actionspotter::Error;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything `train` needs: data source, browser action set, hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Dataset directory (`annotations.json` + `features/`) for training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    /// Generate the data instead of loading it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub actions: BrowseActionSet,
    #[serde(default)]
    pub hyper: HyperParams,
}

impl TrainConfig {
    /// Settings of the synthetic benchmark used by the acceptance runs.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            train: None,
            val: None,
            synth: Some(SynthConfig {
                seed,
                ..SynthConfig::default()
            }),
            actions: BrowseActionSet::default(),
            hyper: benchmark_hyper(seed),
        }
    }

    pub fn from_value(value: Value, base: &Path) -> Result<Self> {
        let mut cfg: Self =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))?;
        for p in [&mut cfg.train, &mut cfg.val].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let value = read_json(path)?;
        Self::from_value(value, parent_dir(path))
    }

    pub fn validate(&self) -> Result<(), Error> {
        match (&self.synth, &self.train, &self.val) {
            (Some(s), None, None) => s.validate()?,
            (None, Some(_), Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "give either `synth` or both `train` and `val` dataset paths".into(),
                ))
            }
        }
        self.hyper.validate()
    }

    /// Applies a command-line seed to the model and, for generated data,
    /// to the generator.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.hyper.seed = seed;
        if let Some(s) = &mut self.synth {
            s.seed = seed;
        }
        self
    }

    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        if let Some(s) = &self.synth {
            let d = synth_generate(s)?;
            return Ok((d.train, d.val));
        }
        let (Some(train), Some(val)) = (&self.train, &self.val) else {
            bail!(Error::Config("no data source".into()));
        };
        let load = |p: &Path| {
            Dataset::load(p).with_context(|| format!("loading dataset {}", p.display()))
        };
        Ok((load(train)?, load(val)?))
    }
}

/// Hyper-parameters of the benchmark runs: fixed entropy temperature at
/// zero, longer warm start.
pub fn benchmark_hyper(seed: u64) -> HyperParams {
    HyperParams {
        seed,
        hidden: 32,
        lr: 1e-3,
        pretrain_epochs: 20,
        epochs: 250,
        patience: 250,
        rho: 0.0,
        temperature_lr: 0.0,
        ..HyperParams::default()
    }
}

/// One line of a manifest: overrides merged into the base config, run for
/// each seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRun {
    pub name: String,
    /// Curve the run belongs to in the report figure.
    #[serde(default = "default_series")]
    pub series: String,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub overrides: Value,
    pub seeds: Vec<u64>,
}

/// System trained by a manifest run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Actionspotter,
    Supervised,
    NoMemory,
    Naive,
    Multitask,
}

fn default_series() -> String {
    "learned".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    /// Path to the base training config, or the config inline.
    pub config: Value,
    pub runs: Vec<ManifestRun>,
    pub output: PathBuf,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let value = read_json(path)?;
        let m: Self =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        if m.runs.is_empty() || m.runs.iter().any(|r| r.seeds.is_empty()) {
            bail!(Error::Config("every manifest run needs at least one seed".into()));
        }
        Ok((m, parent_dir(path).to_path_buf()))
    }

    /// Base config JSON with paths resolved against `base`, and the
    /// directory relative paths inside it resolve against.
    pub fn base_config(&self, base: &Path) -> Result<(Value, PathBuf)> {
        match &self.config {
            Value::String(p) => {
                let path = base.join(p);
                Ok((read_json(&path)?, parent_dir(&path).to_path_buf()))
            }
            v @ Value::Object(_) => Ok((v.clone(), base.to_path_buf())),
            _ => bail!(Error::Config("manifest `config` must be a path or an object".into())),
        }
    }

    pub fn run_config(&self, run: &ManifestRun, base: &Path) -> Result<TrainConfig> {
        let (mut value, dir) = self.base_config(base)?;
        merge(&mut value, &run.overrides);
        TrainConfig::from_value(value, &dir)
    }
}

/// Recursive object merge; non-object values in `patch` replace.
pub fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                merge(t.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (t, p) if !p.is_null() => *t = p.clone(),
        _ => {}
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}
