//! Reproducible benchmark runs over a directory of flat files.
//!
//! A run directory holds a manifest (enough to re-execute the run
//! bit-identically against a scripted backend), one result file per case,
//! one transcript file per deliberated case, per-case metric records, and a
//! summary. Reruns skip case ids whose result file already exists, so an
//! interrupted run resumes without repeating backend calls.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{BackendConfig, CompletionBackend, HttpBackend, ScriptedBackend};
use crate::dataset::{load_cases, Case, DatasetConfig};
use crate::engine::memory::PrecedentMemory;
use crate::engine::types::{default_pool, load_agent_pool, AgentProfile, EngineConfig, Transcript};
use crate::engine::Engine;
use crate::evaluation::{aggregate_performance, MetricResult, RunSummary};
use crate::prompts::{BaselineMethod, PromptTemplateSet};

/// Prediction method for a run: the three baselines or the full bench.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Standard,
    Cot,
    Ls,
    Bench,
}

impl Method {
    pub fn baseline(&self) -> Option<BaselineMethod> {
        match self {
            Method::Standard => Some(BaselineMethod::Standard),
            Method::Cot => Some(BaselineMethod::Cot),
            Method::Ls => Some(BaselineMethod::Ls),
            Method::Bench => None,
        }
    }

    pub const ALL: [Method; 4] = [Method::Standard, Method::Cot, Method::Ls, Method::Bench];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Standard => "standard",
            Method::Cot => "cot",
            Method::Ls => "ls",
            Method::Bench => "bench",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Method::Standard),
            "cot" => Ok(Method::Cot),
            "ls" => Ok(Method::Ls),
            "bench" => Ok(Method::Bench),
            other => Err(format!(
                "unknown method {other:?} (expected standard|cot|ls|bench)"
            )),
        }
    }
}

/// Everything a run needs. Flags and config files both deserialize into
/// this shape.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub method: Method,
    pub model: String,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub limit: Option<usize>,
    pub max_diff: u32,
    /// Exit nonzero when more than this percentage of cases fail.
    pub max_failure_pct: f64,
    pub dataset_config: DatasetConfig,
    pub engine_config: EngineConfig,
    pub backend_config: BackendConfig,
    /// Scripted responses file (JSON array of strings); forces one worker.
    pub script: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(
        dataset: impl Into<PathBuf>,
        method: Method,
        model: impl Into<String>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            method,
            model: model.into(),
            out_dir: out_dir.into(),
            workers: 1,
            limit: None,
            max_diff: crate::evaluation::DEFAULT_MAX_DIFF,
            max_failure_pct: 0.0,
            dataset_config: DatasetConfig::default(),
            engine_config: EngineConfig::default(),
            backend_config: BackendConfig::default(),
            script: None,
            pool: None,
            templates_dir: None,
        }
    }
}

/// Per-case outcome persisted to `cases/<id>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub method: Method,
    pub model: String,
    pub gold_months: u32,
    pub predicted_months: Option<u32>,
    pub consensus_reached: Option<bool>,
    pub rounds_used: Option<u32>,
    pub error: Option<String>,
}

/// Run manifest persisted to `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: Method,
    pub model: String,
    pub seed: u64,
    pub dataset: String,
    pub dataset_config: DatasetConfig,
    pub engine_config: EngineConfig,
    pub max_diff: u32,
    pub workers: usize,
    pub limit: Option<usize>,
    pub backend_kind: String,
    pub base_url: Option<String>,
    pub template_hashes: std::collections::BTreeMap<String, String>,
    pub script_sha256: Option<String>,
}

/// What a finished run looks like to the caller.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub total: usize,
    pub completed: usize,
    pub failed: usize,
    pub skipped_resume: usize,
    pub summary: RunSummary,
    /// Whether the failure rate stayed within `max_failure_pct`.
    pub within_failure_budget: bool,
}

fn sanitize_case_id(id: &str) -> String {
    let mut sanitized: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if sanitized != id {
        let digest = Sha256::digest(id.as_bytes());
        sanitized.push('-');
        sanitized.push_str(&hex::encode(&digest[..4]));
    }
    sanitized
}

fn cases_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("cases")
}

fn transcripts_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("transcripts")
}

pub fn case_record_path(run_dir: &Path, case_id: &str) -> PathBuf {
    cases_dir(run_dir).join(format!("{}.json", sanitize_case_id(case_id)))
}

pub fn transcript_path(run_dir: &Path, case_id: &str) -> PathBuf {
    transcripts_dir(run_dir).join(format!("{}.json", sanitize_case_id(case_id)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes a transcript as pretty JSON; the byte output is deterministic for
/// a fixed transcript.
pub fn persist_transcript(run_dir: &Path, transcript: &Transcript) -> anyhow::Result<PathBuf> {
    let path = transcript_path(run_dir, &transcript.case_id);
    write_json(&path, transcript)?;
    Ok(path)
}

/// Reads a scripted-responses file: a JSON array of strings.
pub fn load_script(path: &Path) -> anyhow::Result<Vec<String>> {
    let content = fs::read_to_string(path)?;
    let script: Vec<String> = serde_json::from_str(&content)?;
    anyhow::ensure!(
        !script.is_empty(),
        "script file {} is empty",
        path.display()
    );
    Ok(script)
}

fn load_pool(config: &RunConfig) -> anyhow::Result<Vec<AgentProfile>> {
    match &config.pool {
        Some(path) => load_agent_pool(path),
        None => Ok(default_pool()),
    }
}

fn load_templates(config: &RunConfig) -> anyhow::Result<PromptTemplateSet> {
    match &config.templates_dir {
        Some(dir) => Ok(PromptTemplateSet::from_dir(dir)?),
        None => Ok(PromptTemplateSet::builtin()),
    }
}

fn build_backend(config: &RunConfig) -> anyhow::Result<Arc<dyn CompletionBackend>> {
    match &config.script {
        Some(path) => Ok(Arc::new(ScriptedBackend::new(load_script(path)?))),
        None => Ok(Arc::new(HttpBackend::new(config.backend_config.clone())?)),
    }
}

fn process_case(
    engine: &Engine,
    config: &RunConfig,
    pool: &[AgentProfile],
    case: &Case,
) -> anyhow::Result<CaseRecord> {
    let mut record = CaseRecord {
        case_id: case.id.clone(),
        method: config.method,
        model: config.model.clone(),
        gold_months: case.gold_term_months,
        predicted_months: None,
        consensus_reached: None,
        rounds_used: None,
        error: None,
    };
    match config.method.baseline() {
        Some(baseline) => match engine.run_baseline_case(case, baseline) {
            Ok(predicted) => record.predicted_months = predicted,
            Err(err) => record.error = Some(err.to_string()),
        },
        None => match engine.run_case(case, pool) {
            Ok(transcript) => {
                if let Some(judgment) = &transcript.final_judgment {
                    record.predicted_months = Some(judgment.term_months);
                    record.consensus_reached = Some(judgment.consensus_reached);
                    record.rounds_used = Some(judgment.rounds_used);
                }
                persist_transcript(&config.out_dir, &transcript)?;
            }
            Err(failure) => {
                record.error = Some(failure.error.to_string());
                if let Some(transcript) = &failure.transcript {
                    persist_transcript(&config.out_dir, transcript)?;
                }
            }
        },
    }
    write_json(&case_record_path(&config.out_dir, &case.id), &record)?;
    Ok(record)
}

/// Executes a run end to end: load cases, process each one (resuming past
/// completed ids), then score and summarize.
pub fn cmd_run(config: &RunConfig) -> anyhow::Result<RunOutcome> {
    anyhow::ensure!(config.workers >= 1, "worker count must be at least 1");
    let mut cases = load_cases(&config.dataset, &config.dataset_config)?;
    if let Some(limit) = config.limit {
        cases.truncate(limit);
    }
    anyhow::ensure!(!cases.is_empty(), "dataset contains no cases");

    fs::create_dir_all(cases_dir(&config.out_dir))?;
    let templates = Arc::new(load_templates(config)?);
    let pool = load_pool(config)?;
    let backend = build_backend(config)?;

    let manifest = RunManifest {
        method: config.method,
        model: config.model.clone(),
        seed: config.engine_config.seed,
        dataset: config.dataset.display().to_string(),
        dataset_config: config.dataset_config.clone(),
        engine_config: config.engine_config.clone(),
        max_diff: config.max_diff,
        workers: config.workers,
        limit: config.limit,
        backend_kind: backend.name().to_string(),
        base_url: config
            .script
            .is_none()
            .then(|| config.backend_config.base_url.clone()),
        template_hashes: templates.template_hashes(),
        script_sha256: match &config.script {
            Some(path) => Some(hex::encode(Sha256::digest(fs::read(path)?))),
            None => None,
        },
    };
    write_json(&config.out_dir.join("manifest.json"), &manifest)?;

    // A scripted backend replays responses in a fixed order, so the cases
    // must be processed sequentially.
    let workers = if config.script.is_some() {
        1
    } else {
        config.workers
    };
    let memory = Arc::new(PrecedentMemory::new());

    let pending: Vec<Case> = cases
        .iter()
        .filter(|case| !case_record_path(&config.out_dir, &case.id).exists())
        .cloned()
        .collect();
    let skipped_resume = cases.len() - pending.len();

    let queue = Mutex::new(VecDeque::from(pending));
    let errors: Mutex<Vec<anyhow::Error>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let engine = Engine::new(
                    backend.clone(),
                    templates.clone(),
                    config.engine_config.clone(),
                    config.model.clone(),
                )
                .with_memory(memory.clone());
                loop {
                    let case = match queue.lock().expect("queue lock").pop_front() {
                        Some(case) => case,
                        None => break,
                    };
                    if let Err(err) = process_case(&engine, config, &pool, &case) {
                        errors.lock().expect("error lock").push(err);
                        break;
                    }
                }
            });
        }
    });
    if let Some(err) = errors.into_inner().expect("error lock").into_iter().next() {
        return Err(err);
    }

    let (summary, metrics) = score_run(&config.out_dir, config.max_diff)?;
    write_metrics(&config.out_dir, &metrics)?;
    write_json(&config.out_dir.join("summary.json"), &summary)?;

    let failed = read_case_records(&config.out_dir)?
        .iter()
        .filter(|r| r.error.is_some())
        .count();
    let total = cases.len();
    let within_failure_budget =
        (failed as f64 / total as f64) * 100.0 <= config.max_failure_pct + f64::EPSILON;
    Ok(RunOutcome {
        total,
        completed: total - failed,
        failed,
        skipped_resume,
        summary,
        within_failure_budget,
    })
}

/// Reads every persisted case record, sorted by case id.
pub fn read_case_records(run_dir: &Path) -> anyhow::Result<Vec<CaseRecord>> {
    let dir = cases_dir(run_dir);
    anyhow::ensure!(
        dir.is_dir(),
        "no cases directory under {}",
        run_dir.display()
    );
    let mut records = Vec::new();
    for entry in fs::read_dir(&dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let record: CaseRecord = serde_json::from_str(&fs::read_to_string(&path)?)
                .map_err(|e| anyhow::anyhow!("corrupt case record {}: {e}", path.display()))?;
            records.push(record);
        }
    }
    records.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(records)
}

/// Recomputes metrics from the persisted predictions. Pure apart from its
/// own output file; rerunning it never touches the backend.
pub fn score_run(run_dir: &Path, max_diff: u32) -> anyhow::Result<(RunSummary, Vec<MetricResult>)> {
    let records = read_case_records(run_dir)?;
    anyhow::ensure!(!records.is_empty(), "run directory has no case records");
    let mut metrics = Vec::new();
    for record in &records {
        metrics.push(MetricResult::compute(
            record.case_id.clone(),
            record.predicted_months,
            record.gold_months,
            max_diff,
        )?);
    }
    let unparsed = records
        .iter()
        .filter(|r| r.predicted_months.is_none())
        .count();
    let summary = RunSummary {
        method: records[0].method.to_string(),
        model: records[0].model.clone(),
        mean_performance_pct: aggregate_performance(&metrics)?,
        legality_pct: None,
        logicality_pct: None,
        morality_pct: None,
        cases: records.len(),
        unparsed,
    };
    Ok((summary, metrics))
}

fn write_metrics(run_dir: &Path, metrics: &[MetricResult]) -> anyhow::Result<()> {
    let mut out = Vec::new();
    for metric in metrics {
        serde_json::to_writer(&mut out, metric)?;
        out.push(b'\n');
    }
    fs::write(run_dir.join("metrics.jsonl"), out)?;
    Ok(())
}

/// Scores a run directory and rewrites `metrics.jsonl`.
pub fn cmd_score(run_dir: &Path, max_diff: u32) -> anyhow::Result<RunSummary> {
    let (summary, metrics) = score_run(run_dir, max_diff)?;
    write_metrics(run_dir, &metrics)?;
    Ok(summary)
}

/// Reads each run directory's summary for the comparison report.
pub fn read_summaries(run_dirs: &[PathBuf]) -> anyhow::Result<Vec<RunSummary>> {
    let mut summaries = Vec::new();
    for dir in run_dirs {
        let path = dir.join("summary.json");
        let content = fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        summaries.push(serde_json::from_str(&content)?);
    }
    Ok(summaries)
}

/// Replays one case against a scripted-responses file and returns the
/// transcript.
pub fn cmd_replay(
    script_path: &Path,
    case_path: &Path,
    pool_path: Option<&Path>,
    engine_config: EngineConfig,
    dataset_config: &DatasetConfig,
) -> anyhow::Result<Transcript> {
    let cases = load_cases(case_path, dataset_config)?;
    let case = cases
        .first()
        .ok_or_else(|| anyhow::anyhow!("case file {} is empty", case_path.display()))?;
    let pool = match pool_path {
        Some(path) => load_agent_pool(path)?,
        None => default_pool(),
    };
    let backend = Arc::new(ScriptedBackend::new(load_script(script_path)?));
    let engine = Engine::new(
        backend,
        Arc::new(PromptTemplateSet::builtin()),
        engine_config,
        "scripted-replay",
    );
    match engine.run_case(case, &pool) {
        Ok(transcript) => Ok(transcript),
        Err(failure) => Err(anyhow::anyhow!("replay failed: {}", failure.error)),
    }
}

/// Human-readable rendering of a transcript for the `replay` subcommand.
pub fn format_transcript(transcript: &Transcript) -> String {
    let mut out = String::new();
    let push = |out: &mut String, line: String| {
        out.push_str(&line);
        out.push('\n');
    };
    push(&mut out, format!("Case: {}", transcript.case_id));
    let bench_ids: Vec<&str> = transcript.bench.agents().map(|a| a.id.as_str()).collect();
    push(&mut out, format!("Bench: {}", bench_ids.join(", ")));
    push(&mut out, "\nInitial opinions:".to_string());
    for opinion in &transcript.initial.opinions {
        push(
            &mut out,
            format!(
                "  {}: {} months. {}",
                opinion.agent_id, opinion.term_months, opinion.rationale
            ),
        );
    }
    if !transcript.abstentions.is_empty() {
        push(
            &mut out,
            format!("Abstaining: {}", transcript.abstentions.join(", ")),
        );
    }
    for round in &transcript.rounds {
        push(&mut out, format!("\n=== Round {} ===", round.index));
        for statement in &round.statements {
            push(
                &mut out,
                format!("[{}] {}", statement.agent_id, statement.text),
            );
        }
        let verdict = if round.verdict.consensus { "Yes" } else { "No" };
        push(
            &mut out,
            format!("Consensus: {verdict}. {}", round.verdict.summary),
        );
        if let Some(updates) = &round.updated_opinions {
            push(&mut out, "Updated opinions:".to_string());
            for opinion in &updates.opinions {
                push(
                    &mut out,
                    format!(
                        "  {}: {} months. {}",
                        opinion.agent_id, opinion.term_months, opinion.rationale
                    ),
                );
            }
        }
    }
    if let Some(summary) = &transcript.closing_summary {
        push(&mut out, format!("\nPanel summary: {summary}"));
    }
    match &transcript.final_judgment {
        Some(judgment) => {
            push(
                &mut out,
                format!(
                    "\nFinal judgment: {} months after {} round(s); consensus reached: {}{}",
                    judgment.term_months,
                    judgment.rounds_used,
                    judgment.consensus_reached,
                    if judgment.fallback {
                        " (median fallback)"
                    } else {
                        ""
                    }
                ),
            );
            push(
                &mut out,
                format!("Justification: {}", judgment.justification),
            );
        }
        None => push(
            &mut out,
            format!(
                "\nNo final judgment: {}",
                transcript.error.as_deref().unwrap_or("unknown failure")
            ),
        ),
    }
    out
}

/// Optional key-value config file (TOML) merged under command-line flags.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub method: Option<String>,
    pub model: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub limit: Option<usize>,
    pub seed: Option<u64>,
    pub max_diff: Option<u32>,
    pub max_failure_pct: Option<f64>,
    pub bench_size: Option<usize>,
    pub max_rounds: Option<u32>,
    pub parse_retries: Option<u32>,
    pub memory_enabled: Option<bool>,
    pub max_fact_chars: Option<usize>,
    pub reject_missing_fields: Option<bool>,
    pub base_url: Option<String>,
    pub api_key_env: Option<String>,
    pub pool: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
    pub script: Option<PathBuf>,
}

pub fn load_file_config(path: &Path) -> anyhow::Result<FileConfig> {
    let content = fs::read_to_string(path)?;
    Ok(toml::from_str(&content)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_dataset(dir: &Path, count: usize) -> PathBuf {
        let path = dir.join("cases.jsonl");
        let mut file = fs::File::create(&path).unwrap();
        for i in 0..count {
            writeln!(
                file,
                r#"{{"id":"case-{i}","fact":"被告人第{i}次盗窃财物。","charge":"盗窃罪","article":"第264条……","gold_term":24}}"#
            )
            .unwrap();
        }
        path
    }

    fn write_script(dir: &Path, entries: &[String]) -> PathBuf {
        let path = dir.join("script.json");
        fs::write(&path, serde_json::to_string_pretty(entries).unwrap()).unwrap();
        path
    }

    fn baseline_script(n: usize, term: u32) -> Vec<String> {
        (0..n)
            .map(|_| format!("判决如下。刑期：{term}个月"))
            .collect()
    }

    #[test]
    fn scripted_baseline_run_writes_artifacts_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), 3);
        let script = write_script(dir.path(), &baseline_script(3, 24));
        let out = dir.path().join("run");
        let mut config = RunConfig::new(&dataset, Method::Standard, "test-model", &out);
        config.script = Some(script.clone());

        let outcome = cmd_run(&config).unwrap();
        assert_eq!(outcome.total, 3);
        assert_eq!(outcome.failed, 0);
        assert!((outcome.summary.mean_performance_pct - 100.0).abs() < 1e-9);
        assert!(out.join("manifest.json").is_file());
        assert!(out.join("summary.json").is_file());
        assert!(out.join("metrics.jsonl").is_file());
        assert_eq!(read_case_records(&out).unwrap().len(), 3);

        // Rerun over the completed directory: every case is skipped, so the
        // empty script is never consulted.
        let empty_script = write_script(dir.path(), &["unused".to_string()]);
        let mut rerun = config.clone();
        rerun.script = Some(empty_script);
        let outcome = cmd_run(&rerun).unwrap();
        assert_eq!(outcome.skipped_resume, 3);
        assert_eq!(outcome.failed, 0);
    }

    #[test]
    fn cot_request_bodies_carry_the_reasoning_phrase() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), 1);
        let backend = Arc::new(ScriptedBackend::from_strs(&["刑期：24个月"]));
        let config = RunConfig::new(&dataset, Method::Cot, "test-model", dir.path().join("run"));
        let engine = Engine::new(
            backend.clone(),
            Arc::new(PromptTemplateSet::builtin()),
            config.engine_config.clone(),
            config.model.clone(),
        );
        let cases = load_cases(&dataset, &config.dataset_config).unwrap();
        let pool = default_pool();
        process_case(&engine, &config, &pool, &cases[0]).unwrap();
        let bodies = backend.request_bodies();
        assert_eq!(bodies.len(), 1);
        assert!(bodies[0].contains("think step by step"));
    }

    #[test]
    fn score_counts_missing_predictions_as_zero() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), 2);
        // First case parses exactly, second returns no term.
        let script = vec!["刑期：24个月".to_string(), "无法判断".to_string()];
        let script = write_script(dir.path(), &script);
        let out = dir.path().join("run");
        let mut config = RunConfig::new(&dataset, Method::Standard, "test-model", &out);
        config.script = Some(script);
        cmd_run(&config).unwrap();

        let summary = cmd_score(&out, 300).unwrap();
        assert!((summary.mean_performance_pct - 50.0).abs() < 1e-9);
        assert_eq!(summary.unparsed, 1);

        // Idempotent: scoring again gives the same numbers.
        let again = cmd_score(&out, 300).unwrap();
        assert_eq!(again.mean_performance_pct, summary.mean_performance_pct);
    }

    #[test]
    fn failure_budget_marks_run_redness() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), 2);
        // One entry only: the second bench case dies on script exhaustion at
        // the first backend call, so only one case record carries an error.
        let script = write_script(dir.path(), &baseline_script(1, 24));
        let out = dir.path().join("run");
        let mut config = RunConfig::new(&dataset, Method::Standard, "test-model", &out);
        config.script = Some(script);
        let outcome = cmd_run(&config).unwrap();
        assert_eq!(outcome.failed, 1);
        assert!(!outcome.within_failure_budget);

        let relaxed = RunConfig {
            max_failure_pct: 50.0,
            ..config.clone()
        };
        let out2 = dir.path().join("run2");
        let mut relaxed = relaxed;
        relaxed.out_dir = out2;
        relaxed.script = Some(write_script(dir.path(), &baseline_script(1, 24)));
        let outcome = cmd_run(&relaxed).unwrap();
        assert!(outcome.within_failure_budget);
    }

    #[test]
    fn sanitized_ids_stay_distinct() {
        assert_eq!(sanitize_case_id("case-1"), "case-1");
        let a = sanitize_case_id("a/b");
        let b = sanitize_case_id("a_b");
        assert_ne!(a, b);
        assert!(a.starts_with("a_b-"));
    }

    #[test]
    fn file_config_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "method = \"bench\"\nmodel = \"gpt-4\"\nseed = 9\nmax_rounds = 2\n",
        )
        .unwrap();
        let config = load_file_config(&path).unwrap();
        assert_eq!(config.method.as_deref(), Some("bench"));
        assert_eq!(config.seed, Some(9));
        assert_eq!(config.max_rounds, Some(2));
    }
}
