use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use dataqual::corpus::{self, CorpusManifest};
use dataqual::diversity::{self, DiversityError, EmbeddingProvider, RemoteEmbedder};
use dataqual::lm::{self, MetaModelPair, NGramModel};
use dataqual::rng::derive_seed;
use dataqual::scaling::{self, MeasuredPoint, Reparam, ScalingLawParams};
use dataqual::scorer::{self, RemotePair, ScoreConfig, ScorerEndpoint};
use dataqual::selection;
use dataqual::Document;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{
    set, usage, write_json, write_snapshot, DiversitySettings, FilterSettings, Global, ReportSettings, ScoreSettings,
    TrainMetaSettings, VerifySettings,
};
use crate::{DiversityArgs, FilterArgs, ReportArgs, ScoreArgs, TrainMetaArgs, VerifyArgs};

pub const SMALL_MODEL: &str = "small.model";
pub const LARGE_MODEL: &str = "large.model";
pub const PAIR_FILE: &str = "pair.json";

/// Raised when a verification check fails; maps to exit code 4.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn prepare_out(global: &Global) -> Result<()> {
    fs::create_dir_all(&global.out).with_context(|| format!("creating {}", global.out.display()))
}

fn corpus_id(path: &Path) -> String {
    CorpusManifest::load(path)
        .map(|m| m.corpus_id)
        .unwrap_or_else(|_| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

fn load_docs(path: &Path, workers: usize) -> Result<(String, Vec<Document>, usize)> {
    let shards = corpus::corpus_shards(path).with_context(|| format!("opening corpus {}", path.display()))?;
    let loaded = corpus::load_corpus(&shards, workers)?;
    for e in loaded.errors.iter().take(10) {
        log::warn!("skipping record: {e}");
    }
    if loaded.errors.len() > 10 {
        log::warn!("{} more malformed records skipped", loaded.errors.len() - 10);
    }
    log::info!("{}: {} documents", path.display(), loaded.documents.len());
    Ok((corpus_id(path), loaded.documents, loaded.errors.len()))
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    match value {
        Some(v) => Ok(v.clone()),
        None => usage(format!("missing required --{flag}")),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairDescriptor {
    pub train_corpus_id: String,
    pub corpus_fingerprint: String,
    pub train_docs: usize,
    pub small_order: usize,
    pub large_order: usize,
    pub smoothing_k: f64,
    pub small_model: String,
    pub large_model: String,
    pub small_fingerprint: String,
    pub large_fingerprint: String,
}

pub fn train_meta(global: &Global, mut s: TrainMetaSettings, a: TrainMetaArgs) -> Result<()> {
    set(&mut s.corpus, a.corpus.map(Some));
    set(&mut s.small_order, a.small_order);
    set(&mut s.large_order, a.large_order);
    set(&mut s.smoothing_k, a.smoothing_k);
    prepare_out(global)?;
    write_snapshot(global, "train-meta", "train_meta", &s)?;
    let corpus = required(&s.corpus, "corpus")?;
    if s.small_order >= s.large_order {
        return Err(lm::LmError::InvalidPairSpec {
            small: s.small_order,
            large: s.large_order,
        }
        .into());
    }
    let (id, docs, _) = load_docs(&corpus, global.workers)?;
    let pair = corpus::with_pool(global.workers, || {
        lm::train_pair(&docs, &id, s.small_order, s.large_order, s.smoothing_k)
    })?;
    pair.small.save(&global.out.join(SMALL_MODEL))?;
    pair.large.save(&global.out.join(LARGE_MODEL))?;
    let descriptor = PairDescriptor {
        train_corpus_id: id,
        corpus_fingerprint: corpus::corpus_fingerprint(&docs),
        train_docs: docs.len(),
        small_order: s.small_order,
        large_order: s.large_order,
        smoothing_k: s.smoothing_k,
        small_model: SMALL_MODEL.into(),
        large_model: LARGE_MODEL.into(),
        small_fingerprint: pair.small.fingerprint(),
        large_fingerprint: pair.large.fingerprint(),
    };
    write_json(&global.out.join(PAIR_FILE), &descriptor)?;
    log::info!(
        "trained orders ({}, {}) on {} documents",
        s.small_order,
        s.large_order,
        descriptor.train_docs
    );
    Ok(())
}

fn load_pair(dir: &Path) -> Result<MetaModelPair> {
    let small = NGramModel::load(&dir.join(SMALL_MODEL))?;
    let large = NGramModel::load(&dir.join(LARGE_MODEL))?;
    let id = fs::read_to_string(dir.join(PAIR_FILE))
        .ok()
        .and_then(|t| serde_json::from_str::<PairDescriptor>(&t).ok())
        .map(|d| d.train_corpus_id)
        .unwrap_or_default();
    Ok(MetaModelPair::new(small, large, id)?)
}

pub fn score(global: &Global, mut s: ScoreSettings, a: ScoreArgs) -> Result<()> {
    set(&mut s.corpus, a.corpus.map(Some));
    set(&mut s.models, a.models.map(Some));
    set(&mut s.remote_small, a.remote_small.map(Some));
    set(&mut s.remote_large, a.remote_large.map(Some));
    set(&mut s.batch_size, a.batch_size);
    set(&mut s.timeout_secs, a.timeout_secs);
    set(&mut s.cache, a.cache.map(Some));
    set(&mut s.error_budget, a.error_budget);
    set(&mut s.chunk_size, a.chunk_size);
    prepare_out(global)?;
    write_snapshot(global, "score", "score", &s)?;
    let corpus = required(&s.corpus, "corpus")?;
    if !(0.0..=1.0).contains(&s.error_budget) {
        return usage(format!("error budget {} not in [0, 1]", s.error_budget));
    }
    if !(s.timeout_secs > 0.0 && s.timeout_secs.is_finite()) || s.chunk_size == 0 || s.batch_size == 0 {
        return usage("timeout, chunk size and batch size must be positive");
    }
    let endpoint = match (&s.models, &s.remote_small, &s.remote_large) {
        (Some(dir), None, None) => ScorerEndpoint::local(load_pair(dir)?),
        (None, Some(small), Some(large)) => ScorerEndpoint::Remote(RemotePair::new(
            small,
            large,
            s.batch_size,
            Duration::from_secs_f64(s.timeout_secs),
        )),
        _ => return usage("configure either --models or both --remote-small and --remote-large"),
    };
    let (_, docs, record_errors) = load_docs(&corpus, global.workers)?;
    let config = ScoreConfig {
        cache_path: s.cache.clone(),
        workers: global.workers,
        error_budget: s.error_budget,
        chunk_size: s.chunk_size,
    };
    let outcome = scorer::score_corpus(&endpoint, docs, &config)?;
    scorer::write_score_file(&global.out.join("scores.tsv"), &outcome.scores)?;
    scorer::write_error_file(&global.out.join("score_errors.tsv"), &outcome.errors)?;
    let (small_fp, large_fp) = endpoint.fingerprints();
    let summary = json!({
        "corpus": corpus,
        "small_model": small_fp,
        "large_model": large_fp,
        "record_errors": record_errors,
        "error_fraction": outcome.error_fraction(),
        "error_budget": s.error_budget,
        "summary": outcome.summary,
    });
    write_json(&global.out.join("score_summary.json"), &summary)?;
    log::info!(
        "scored {} documents ({} cached, {} failed), mean d {:.4}",
        outcome.summary.count,
        outcome.summary.cache_hits,
        outcome.summary.errors,
        outcome.summary.mean_d
    );
    outcome.check_budget(s.error_budget)?;
    Ok(())
}

pub fn filter(global: &Global, mut s: FilterSettings, a: FilterArgs) -> Result<()> {
    set(&mut s.scores, a.scores.map(Some));
    set(&mut s.corpus, a.corpus.map(Some));
    set(&mut s.method, a.method);
    set(&mut s.keep_rate, a.keep_rate);
    set(&mut s.tau, a.tau);
    set(&mut s.lo, a.lo);
    set(&mut s.hi, a.hi);
    set(&mut s.pareto_alpha, a.pareto_alpha);
    set(&mut s.classifier_scores, a.classifier_scores.map(Some));
    set(&mut s.shard_size, a.shard_size);
    prepare_out(global)?;
    write_snapshot(global, "filter", "filter", &s)?;
    let seed = derive_seed(global.seed, "selection");
    let result = if s.method == "pareto" {
        let path = required(&s.classifier_scores, "classifier-scores")?;
        let scores = selection::read_classifier_scores(&path)?;
        let items: Vec<(&str, f64)> = scores.iter().map(|(id, v)| (id.as_str(), *v)).collect();
        selection::pareto_noisy_threshold(&items, s.pareto_alpha, seed)?
    } else {
        let scores = scorer::read_score_file(&required(&s.scores, "scores")?)?;
        match s.method.as_str() {
            "topk" => selection::select_topk(&scores, s.keep_rate)?,
            "temperature" => selection::select_temperature(&scores, s.keep_rate, s.tau, seed)?,
            "gate" => selection::gate_scores(&scores, s.lo, s.hi)?,
            other => return usage(format!("unknown method {other:?}; expected topk, temperature, gate or pareto")),
        }
    };
    selection::write_kept_ids(&global.out.join("kept_ids.txt"), &result)?;
    selection::write_audit(&global.out.join("audit.json"), &result)?;
    if let Some(corpus) = &s.corpus {
        let id = format!("{}-{}", corpus_id(corpus), result.policy.method.name());
        selection::apply_selection(&result, corpus, &global.out.join("corpus"), s.shard_size, &id)?;
    }
    log::info!(
        "{}: kept {} of {}",
        result.policy.method.name(),
        result.audit.kept,
        result.audit.input
    );
    Ok(())
}

fn hashed_provider(s: &DiversitySettings) -> Result<EmbeddingProvider> {
    Ok(EmbeddingProvider::hashed(s.dim, s.embed_seed)?)
}

/// Runs `f` with the configured embedder, retrying once with the hashed
/// embedding when the remote service fails and fallback is enabled.
fn with_embedder<T>(
    s: &DiversitySettings,
    f: impl Fn(&EmbeddingProvider) -> Result<T, DiversityError>,
) -> Result<(T, Option<String>)> {
    let Some(url) = &s.embed_url else {
        return Ok((f(&hashed_provider(s)?)?, None));
    };
    let remote = EmbeddingProvider::Remote(RemoteEmbedder::new(
        url,
        s.batch_size,
        Duration::from_secs_f64(s.timeout_secs),
    ));
    match f(&remote) {
        Err(e @ DiversityError::EmbedderUnavailable(_)) if s.embed_fallback => {
            log::warn!("{e}; falling back to the hashed embedding");
            let note = format!("remote embedder {url} unavailable; hashed embedding used instead");
            Ok((f(&hashed_provider(s)?)?, Some(note)))
        }
        other => Ok((other?, None)),
    }
}

pub fn diversity(global: &Global, mut s: DiversitySettings, a: DiversityArgs) -> Result<()> {
    set(&mut s.corpus, a.corpus.map(Some));
    set(&mut s.n, a.n);
    set(&mut s.repeats, a.repeats);
    set(&mut s.dim, a.dim);
    set(&mut s.embed_seed, a.embed_seed);
    set(&mut s.embed_url, a.embed_url.map(Some));
    s.embed_fallback |= a.embed_fallback;
    set(&mut s.batch_size, a.batch_size);
    set(&mut s.timeout_secs, a.timeout_secs);
    set(&mut s.mix, a.mix);
    set(&mut s.max_combinations, a.max_combinations.map(Some));
    prepare_out(global)?;
    write_snapshot(global, "diversity", "diversity", &s)?;
    if !(s.timeout_secs > 0.0 && s.timeout_secs.is_finite()) || s.batch_size == 0 {
        return usage("timeout and batch size must be positive");
    }
    let seed = derive_seed(global.seed, "diversity");
    if !s.mix.is_empty() {
        let mut corpora = Vec::with_capacity(s.mix.len());
        for path in &s.mix {
            let (id, docs, _) = load_docs(path, global.workers)?;
            corpora.push((id, docs));
        }
        let (curve, note) = with_embedder(&s, |p| {
            corpus::with_pool(global.workers, || {
                diversity::dataset_mix_experiment(&corpora, p, s.n, s.repeats, seed, s.max_combinations)
            })
        })?;
        let mut value = serde_json::to_value(&curve)?;
        value["note"] = note.into();
        write_json(&global.out.join("mix_curve.json"), &value)?;
        for p in &curve.points {
            log::info!("{} corpora: diversity {:.4} +- {:.4}", p.n_datasets, p.mean, p.std);
        }
        return Ok(());
    }
    let corpus = required(&s.corpus, "corpus")?;
    let (id, docs, _) = load_docs(&corpus, global.workers)?;
    let (mut report, note) = with_embedder(&s, |p| {
        corpus::with_pool(global.workers, || diversity::subsample_diversity(&id, &docs, p, s.n, s.repeats, seed))
    })?;
    if let Some(note) = note {
        report.note = Some(match report.note.take() {
            Some(existing) => format!("{existing}; {note}"),
            None => note,
        });
    }
    write_json(&global.out.join("diversity_report.json"), &report)?;
    log::info!("{id}: diversity {:.4} +- {:.4} over {} repeats", report.mean, report.std, report.repeats);
    Ok(())
}

fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    lin_grid(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

const SECANT_TOLERANCE: f64 = 1e-4;
const POWER_LAW_TOLERANCE: f64 = 1e-3;

pub fn verify_scaling(global: &Global, mut s: VerifySettings, a: VerifyArgs) -> Result<()> {
    set(&mut s.e, a.e);
    set(&mut s.a_coef, a.a_coef);
    set(&mut s.b_coef, a.b_coef);
    set(&mut s.eta, a.eta);
    set(&mut s.a, a.a);
    set(&mut s.a_lo, a.a_lo);
    set(&mut s.a_hi, a.a_hi);
    set(&mut s.a_points, a.a_points);
    set(&mut s.n_lo, a.n_lo);
    set(&mut s.n_hi, a.n_hi);
    set(&mut s.n_points, a.n_points);
    set(&mut s.n_p, a.n_p);
    set(&mut s.n_q, a.n_q);
    set(&mut s.d, a.d);
    set(&mut s.secant_gap, a.secant_gap);
    set(&mut s.sizes, a.sizes);
    set(&mut s.measured, a.measured.map(Some));
    s.csv |= a.csv;
    s.sweep_compute |= a.sweep_compute;
    set(&mut s.compute_lo, a.compute_lo);
    set(&mut s.compute_hi, a.compute_hi);
    set(&mut s.compute_steps, a.compute_steps);
    set(&mut s.flops_per_token_per_param, a.flops_per_token_per_param);
    prepare_out(global)?;
    write_snapshot(global, "verify-scaling", "verify_scaling", &s)?;
    if s.a_points == 0 || s.n_points == 0 || !(s.a_lo > 0.0 && s.a_lo <= s.a_hi && s.a_hi < 1.0) {
        return usage("a grid must lie in (0, 1) with at least one point, as must the N grid");
    }
    if !(s.n_lo > 0.0 && s.n_lo <= s.n_hi) || !(s.secant_gap > 0.0) {
        return usage("N grid must be positive and ascending; secant gap must be positive");
    }
    let params = ScalingLawParams::from_exponent(s.e, s.a_coef, s.b_coef, s.a, s.eta)?;

    let sign_a = lin_grid(s.a_lo, s.a_hi, s.n_points);
    let sign_n = log_grid(s.n_lo, s.n_hi, s.n_points);
    let mut dl = Vec::new();
    let mut mixed = Vec::new();
    let mut brackets = Vec::new();
    let mut negative = true;
    let mut sign_ok = true;
    let mut secant_err = 0.0f64;
    for &a in &sign_a {
        let r = Reparam {
            e: s.e,
            a_coef: s.a_coef,
            b_coef: s.b_coef,
            a,
            eta: s.eta,
        };
        let (mut dl_row, mut mixed_row, mut bracket_row) = (Vec::new(), Vec::new(), Vec::new());
        for &n in &sign_n {
            let g = scaling::dl_dn(&r, n)?;
            let m = scaling::d2l_dadn(s.a_coef, a, s.eta, n)?;
            let b = scaling::bracket(a, s.eta, n);
            negative &= g < 0.0;
            sign_ok &= (b < 0.0) == (m < 0.0) && (b > 0.0) == (m > 0.0);
            let sec = scaling::secant_slope(&r, n, n * (1.0 + s.secant_gap), s.d)?;
            secant_err = secant_err.max((sec.slope - g).abs() / g.abs());
            dl_row.push(g);
            mixed_row.push(m);
            bracket_row.push(b);
        }
        dl.push(dl_row);
        mixed.push(mixed_row);
        brackets.push(bracket_row);
    }
    let secant_ok = secant_err <= SECANT_TOLERANCE;

    let a_grid = lin_grid(s.a_lo, s.a_hi, s.a_points);
    let monotone = scaling::verify_monotonic_d_in_a(s.e, s.a_coef, s.b_coef, s.eta, s.n_p, s.n_q, s.d, &a_grid);
    let (monotone_json, monotone_ok, condition_error) = match monotone {
        Ok(m) => (serde_json::to_value(&m)?, m.pass, None),
        Err(e @ scaling::ScalingError::ConditionRegionViolated { .. }) => {
            (json!({ "error": e.to_string(), "code": e.code() }), false, Some(e))
        }
        Err(e) => return Err(e.into()),
    };

    let points: Vec<MeasuredPoint> = match &s.measured {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => s
            .sizes
            .iter()
            .map(|&n| {
                Ok(MeasuredPoint {
                    label: format!("N={n:e}"),
                    n,
                    mean_loss: scaling::expected_loss(&params, n, s.d)?,
                })
            })
            .collect::<Result<_, scaling::ScalingError>>()?,
    };
    let rows = scaling::loss_vs_size_report(&points)?;
    let table = scaling::secant_table_text(&rows);
    fs::write(global.out.join("secant_table.txt"), &table)?;
    if s.csv {
        fs::write(global.out.join("secant_table.csv"), scaling::secant_table_csv(&rows))?;
    }

    let (sweep_json, sweep_ok) = if s.sweep_compute {
        let rec = scaling::power_law_recovery(
            &params,
            s.compute_lo,
            s.compute_hi,
            s.compute_steps,
            s.flops_per_token_per_param,
        )?;
        let ok = (rec.fitted_a - rec.a).abs() < POWER_LAW_TOLERANCE && (rec.fitted_b - rec.b).abs() < POWER_LAW_TOLERANCE;
        let mut v = serde_json::to_value(&rec)?;
        v["pass"] = ok.into();
        (v, ok)
    } else {
        (Value::Null, true)
    };

    let pass = negative && sign_ok && secant_ok && monotone_ok && sweep_ok;
    let report = json!({
        "params": {
            "e": s.e, "a_coef": s.a_coef, "b_coef": s.b_coef, "eta": s.eta,
            "a": params.a(), "b": params.b(), "alpha": params.alpha, "beta": params.beta,
        },
        "derivatives": {
            "a_grid": sign_a,
            "n_grid": sign_n,
            "dl_dn": dl,
            "d2l_dadn": mixed,
            "bracket": brackets,
            "dl_dn_negative": negative,
            "mixed_sign_matches_bracket": sign_ok,
        },
        "secant_convergence": {
            "relative_gap": s.secant_gap,
            "max_relative_error": secant_err,
            "tolerance": SECANT_TOLERANCE,
            "pass": secant_ok,
        },
        "monotonicity": monotone_json,
        "secant_table": rows,
        "power_law": sweep_json,
        "pass": pass,
    });
    write_json(&global.out.join("verification.json"), &report)?;
    print!("{table}");
    if let Some(e) = condition_error {
        return Err(e.into());
    }
    if !pass {
        let mut failed = Vec::new();
        for (ok, what) in [
            (negative, "dL/dN sign"),
            (sign_ok, "mixed-partial sign"),
            (secant_ok, "secant convergence"),
            (monotone_ok, "monotonicity"),
            (sweep_ok, "power-law recovery"),
        ] {
            if !ok {
                failed.push(what);
            }
        }
        return Err(VerificationFailed(failed.join(", ")).into());
    }
    log::info!("all scaling checks pass");
    Ok(())
}

fn read_optional(dir: &Path, name: &str, unreadable: &mut Vec<String>) -> Option<Value> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).ok()?;
    match serde_json::from_str(&text) {
        Ok(v) => Some(v),
        Err(e) => {
            unreadable.push(format!("{}: {e}", path.display()));
            None
        }
    }
}

#[derive(Debug, Serialize)]
struct RunRow {
    run: String,
    commands: Vec<String>,
    scored: Option<u64>,
    mean_d: Option<f64>,
    method: Option<String>,
    input: Option<u64>,
    kept: Option<u64>,
    keep_rate: Option<f64>,
    diversity_mean: Option<f64>,
    diversity_std: Option<f64>,
    diversity_n: Option<u64>,
    embedder: Option<String>,
    verification_pass: Option<bool>,
}

const REPORT_FILES: [&str; 5] = [
    "score_summary.json",
    "audit.json",
    "diversity_report.json",
    "verification.json",
    "run_config.json",
];

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn fmt_f(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

pub fn report(global: &Global, mut s: ReportSettings, a: ReportArgs) -> Result<()> {
    set(&mut s.runs, a.runs);
    prepare_out(global)?;
    write_snapshot(global, "report", "report", &s)?;
    if s.runs.is_empty() {
        log::warn!("no run directories given; writing an empty report");
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut unreadable = Vec::new();
    for dir in &s.runs {
        let name = dir.display().to_string();
        if !dir.is_dir() || !REPORT_FILES.iter().any(|f| dir.join(f).is_file()) {
            missing.push(name);
            continue;
        }
        let config = read_optional(dir, "run_config.json", &mut unreadable);
        let score = read_optional(dir, "score_summary.json", &mut unreadable);
        let audit = read_optional(dir, "audit.json", &mut unreadable);
        let div = read_optional(dir, "diversity_report.json", &mut unreadable);
        let verify = read_optional(dir, "verification.json", &mut unreadable);
        let mut commands = Vec::new();
        for (present, cmd) in [
            (score.is_some(), "score"),
            (audit.is_some(), "filter"),
            (div.is_some(), "diversity"),
            (verify.is_some(), "verify-scaling"),
        ] {
            if present {
                commands.push(cmd.to_string());
            }
        }
        if commands.is_empty() {
            if let Some(c) = config.as_ref().and_then(|c| c["command"].as_str()) {
                commands.push(c.to_string());
            }
        }
        let (input, kept) = match &audit {
            Some(a) => (a["input"].as_u64(), a["kept"].as_u64()),
            None => (None, None),
        };
        rows.push(RunRow {
            run: name,
            commands,
            scored: score.as_ref().and_then(|v| v["summary"]["count"].as_u64()),
            mean_d: score.as_ref().and_then(|v| v["summary"]["mean_d"].as_f64()),
            method: audit.as_ref().and_then(|v| v["method"].as_str().map(String::from)),
            input,
            kept,
            keep_rate: input.zip(kept).filter(|(i, _)| *i > 0).map(|(i, k)| k as f64 / i as f64),
            diversity_mean: div.as_ref().and_then(|v| v["mean"].as_f64()),
            diversity_std: div.as_ref().and_then(|v| v["std"].as_f64()),
            diversity_n: div.as_ref().and_then(|v| v["sample_size"].as_u64()),
            embedder: div.as_ref().and_then(|v| v["embedder"].as_str().map(String::from)),
            verification_pass: verify.as_ref().and_then(|v| v["pass"].as_bool()),
        });
    }
    for m in &missing {
        log::warn!("no run outputs found in {m}");
    }
    let embedders: BTreeSet<&str> = rows.iter().filter_map(|r| r.embedder.as_deref()).collect();
    let note = "Diversity values are comparable only between runs with the same embedder fingerprint.";
    let json_report = json!({
        "note": note,
        "embedders": embedders,
        "runs": rows,
        "missing": missing,
        "unreadable": unreadable,
    });
    write_json(&global.out.join("report.json"), &json_report)?;

    let mut md = String::from("# Run report\n\n");
    md.push_str(note);
    md.push_str("\n\n");
    if embedders.len() > 1 {
        md.push_str("Warning: these runs use different embedders, so their diversity columns do not compare.\n\n");
    }
    md.push_str("| run | method | kept | keep rate | scored | mean d | diversity | std | n | embedder |\n");
    md.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in &rows {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.run,
            fmt_opt(&r.method),
            fmt_opt(&r.kept),
            fmt_f(r.keep_rate, 3),
            fmt_opt(&r.scored),
            fmt_f(r.mean_d, 4),
            fmt_f(r.diversity_mean, 4),
            fmt_f(r.diversity_std, 4),
            fmt_opt(&r.diversity_n),
            fmt_opt(&r.embedder),
        ));
    }
    let verified: Vec<&RunRow> = rows.iter().filter(|r| r.verification_pass.is_some()).collect();
    if !verified.is_empty() {
        md.push_str("\n## Scaling verification\n\n");
        for r in verified {
            let verdict = if r.verification_pass == Some(true) { "pass" } else { "FAIL" };
            md.push_str(&format!("- {}: {verdict}\n", r.run));
        }
    }
    if !missing.is_empty() || !unreadable.is_empty() {
        md.push_str("\n## Missing inputs\n\n");
        for m in missing.iter().chain(&unreadable) {
            md.push_str(&format!("- {m}\n"));
        }
    }
    fs::write(global.out.join("report.md"), md)?;
    log::info!("report over {} runs ({} missing)", rows.len(), missing.len());
    Ok(())
}
