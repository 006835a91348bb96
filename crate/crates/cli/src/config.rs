//! Run settings: defaults, overlaid by the JSON config file, overlaid by flags.
//! The resolved settings are written as `run_config.json`, which is itself a
//! valid config file for replaying the run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const SNAPSHOT_FILE: &str = "run_config.json";

/// Raised for invalid arguments; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// Present in snapshots; ignored when loading.
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub log_level: Option<String>,
    pub out: Option<PathBuf>,
    pub train_meta: Option<TrainMetaSettings>,
    pub score: Option<ScoreSettings>,
    pub filter: Option<FilterSettings>,
    pub diversity: Option<DiversitySettings>,
    pub verify_scaling: Option<VerifySettings>,
    pub report: Option<ReportSettings>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Global {
    pub seed: u64,
    pub workers: usize,
    pub log_level: String,
    pub out: PathBuf,
}

impl Default for Global {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            log_level: "info".into(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainMetaSettings {
    pub corpus: Option<PathBuf>,
    pub small_order: usize,
    pub large_order: usize,
    pub smoothing_k: f64,
}

impl Default for TrainMetaSettings {
    fn default() -> Self {
        Self {
            corpus: None,
            small_order: 2,
            large_order: 5,
            smoothing_k: dataqual::lm::DEFAULT_SMOOTHING_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSettings {
    pub corpus: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub remote_small: Option<String>,
    pub remote_large: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: f64,
    pub cache: Option<PathBuf>,
    pub error_budget: f64,
    pub chunk_size: usize,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        Self {
            corpus: None,
            models: None,
            remote_small: None,
            remote_large: None,
            batch_size: 32,
            timeout_secs: 60.0,
            cache: None,
            error_budget: dataqual::scorer::DEFAULT_ERROR_BUDGET,
            chunk_size: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub scores: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub method: String,
    pub keep_rate: f64,
    pub tau: f64,
    pub lo: f64,
    pub hi: f64,
    pub pareto_alpha: f64,
    pub classifier_scores: Option<PathBuf>,
    pub shard_size: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            scores: None,
            corpus: None,
            method: "topk".into(),
            keep_rate: 0.7,
            tau: 1.0,
            lo: 15.0,
            hi: 85.0,
            pareto_alpha: 9.0,
            classifier_scores: None,
            shard_size: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiversitySettings {
    pub corpus: Option<PathBuf>,
    pub n: usize,
    pub repeats: usize,
    pub dim: usize,
    pub embed_seed: u64,
    pub embed_url: Option<String>,
    pub embed_fallback: bool,
    pub batch_size: usize,
    pub timeout_secs: f64,
    pub mix: Vec<PathBuf>,
    pub max_combinations: Option<usize>,
}

impl Default for DiversitySettings {
    fn default() -> Self {
        Self {
            corpus: None,
            n: dataqual::diversity::DEFAULT_SAMPLE_SIZE,
            repeats: dataqual::diversity::DEFAULT_REPEATS,
            dim: dataqual::diversity::DEFAULT_DIM,
            embed_seed: 0,
            embed_url: None,
            embed_fallback: false,
            batch_size: 64,
            timeout_secs: 60.0,
            mix: Vec::new(),
            max_combinations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub e: f64,
    pub a_coef: f64,
    pub b_coef: f64,
    pub eta: f64,
    /// Model scaling exponent used for the secant table and compute sweep.
    pub a: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub a_points: usize,
    pub n_lo: f64,
    pub n_hi: f64,
    pub n_points: usize,
    pub n_p: f64,
    pub n_q: f64,
    pub d: f64,
    pub secant_gap: f64,
    pub sizes: Vec<f64>,
    pub measured: Option<PathBuf>,
    pub csv: bool,
    pub sweep_compute: bool,
    pub compute_lo: f64,
    pub compute_hi: f64,
    pub compute_steps: usize,
    pub flops_per_token_per_param: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            e: 1.69,
            a_coef: 406.4,
            b_coef: 410.7,
            eta: 0.62,
            a: 0.28 / 0.62,
            a_lo: 0.1,
            a_hi: 0.9,
            a_points: 100,
            n_lo: 1e3,
            n_hi: 1e12,
            n_points: 10,
            n_p: 1e8,
            n_q: 1e9,
            d: 1e10,
            secant_gap: 1e-6,
            sizes: vec![1e7, 1e8, 1e9, 1e10],
            measured: None,
            csv: false,
            sweep_compute: false,
            compute_lo: 1e18,
            compute_hi: 1e22,
            compute_steps: 17,
            flops_per_token_per_param: dataqual::scaling::DEFAULT_FLOPS_PER_TOKEN_PER_PARAM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub runs: Vec<PathBuf>,
}

/// Overwrites `target` with the flag value when the flag was given.
pub fn set<T>(target: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *target = v;
    }
}

/// Writes the resolved settings of one command next to its outputs.
pub fn write_snapshot<S: Serialize>(global: &Global, command: &str, section: &str, settings: &S) -> Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("command".into(), command.into());
    doc.insert("seed".into(), global.seed.into());
    doc.insert("workers".into(), global.workers.into());
    doc.insert("log_level".into(), global.log_level.clone().into());
    doc.insert("out".into(), serde_json::to_value(&global.out)?);
    doc.insert(section.into(), serde_json::to_value(settings)?);
    let path = global.out.join(SNAPSHOT_FILE);
    write_json(&path, &serde_json::Value::Object(doc))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
