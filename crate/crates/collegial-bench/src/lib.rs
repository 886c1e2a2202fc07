//! A multi-agent deliberation engine and benchmark harness for prison-term
//! prediction.
//!
//! Role-conditioned LLM agents form a collegial bench, propose independent
//! sentences, deliberate in moderated rounds until the presiding judge
//! declares consensus, and synthesize one final judgment. The harness loads
//! case files, runs the bench (or one of three single-call prompting
//! baselines), scores predictions with a normalized log distance over
//! months, and computes inter-rater agreement over human quality
//! annotations.
//!
//! Start with the runnable examples (`cargo run --example
//! replay_deliberation`) or the `collegial-bench` binary, which exposes the
//! same machinery as subcommands: `run`, `score`, `kappa`, `report`,
//! `replay`, `validate`, and `parse`.

pub mod backend;
pub mod dataset;
pub mod engine;
pub mod evaluation;
pub mod prompts;
pub mod runner;
pub mod term_parser;

pub use backend::{
    BackendConfig, ChatMessage, ChatRole, CompletionBackend, CompletionRequest, HttpBackend,
    ScriptedBackend,
};
pub use dataset::{Case, DatasetConfig};
pub use engine::memory::PrecedentMemory;
pub use engine::types::{
    AgentProfile, Bench, BenchComposition, DeliberationRound, EngineConfig, FinalJudgment,
    OpinionSet, Role, SentencingOpinion, Statement, Transcript,
};
pub use engine::{CaseFailure, Engine, EngineError};
pub use evaluation::{MetricResult, QualityAnnotation, ReportFormat, RunSummary};
pub use prompts::{BaselineMethod, PromptTemplateSet, Stage};
pub use runner::{Method, RunConfig};
