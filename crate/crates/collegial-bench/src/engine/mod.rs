//! The four-stage deliberation pipeline: bench selection, independent
//! sentencing, moderated rounds with consensus checks, and final synthesis.
//!
//! Within a case every backend call is strictly sequential, because each
//! stage's prompt depends on all prior outputs and scripted replays must
//! see calls in a fixed order. Concurrency happens across cases, not inside
//! one.

pub mod memory;
pub mod types;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{BackendError, ChatMessage, CompletionBackend, CompletionRequest};
use crate::dataset::Case;
use crate::prompts::{BaselineMethod, PromptTemplateSet, RETRY_CONSENSUS, RETRY_OPINION};
use crate::term_parser::{
    extract_prison_term_months, parse_consensus, parse_opinion, ConsensusParse, ParsedOpinion,
};
use memory::PrecedentMemory;
use types::{
    AgentProfile, Bench, DeliberationRound, EngineConfig, FinalJudgment, OpinionSet, Role,
    SentencingOpinion, Statement, Transcript,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("agent pool contains no presiding judge")]
    NoPresidingJudge,
    #[error("agent pool too small: need {needed} {what}, found {found}")]
    PoolTooSmall {
        what: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("duplicate agent id {0:?} in pool")]
    DuplicateAgentId(String),
    #[error("bench_size must be at least 1")]
    InvalidBenchSize,
    #[error("max_rounds must be at least 1")]
    InvalidMaxRounds,
    #[error("composition ({judges} judges + {lay_judges} lay judges) does not fill bench_size {bench_size}")]
    CompositionMismatch {
        judges: usize,
        lay_judges: usize,
        bench_size: usize,
    },
    #[error("presiding judge produced no parseable opinion after {attempts} attempts")]
    PresidingUnparseable { attempts: u32 },
    #[error("every bench member abstained")]
    AllMembersAbstained,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A case-level failure carrying whatever transcript was built before the
/// failure, so partial runs can still be persisted.
#[derive(Debug)]
pub struct CaseFailure {
    pub error: EngineError,
    pub transcript: Option<Transcript>,
}

impl std::fmt::Display for CaseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for CaseFailure {}

/// Derives a per-case seed from the run seed and the case id, so every case
/// gets its own deterministic bench draw.
pub fn case_seed(base: u64, case_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(case_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Orchestrates deliberations and baselines against one backend.
pub struct Engine {
    backend: Arc<dyn CompletionBackend>,
    prompts: Arc<PromptTemplateSet>,
    pub config: EngineConfig,
    pub model: String,
    memory: Option<Arc<PrecedentMemory>>,
}

impl Engine {
    pub fn new(
        backend: Arc<dyn CompletionBackend>,
        prompts: Arc<PromptTemplateSet>,
        config: EngineConfig,
        model: impl Into<String>,
    ) -> Self {
        Self {
            backend,
            prompts,
            config,
            model: model.into(),
            memory: None,
        }
    }

    /// Attaches a shared precedent store; it is consulted only when
    /// `memory_enabled` is set.
    pub fn with_memory(mut self, memory: Arc<PrecedentMemory>) -> Self {
        self.memory = Some(memory);
        self
    }

    fn complete(&self, messages: Vec<ChatMessage>) -> Result<String, BackendError> {
        let request = CompletionRequest::new(self.model.clone(), messages);
        self.backend.complete(&request)
    }

    /// Selects the bench for one simulation: the first presiding judge in
    /// the pool plus `bench_size - 1` members sampled without replacement
    /// with a generator seeded by `seed`. Fixed (pool, seed) always yields
    /// the same bench.
    pub fn select_bench(&self, pool: &[AgentProfile], seed: u64) -> Result<Bench, EngineError> {
        if self.config.bench_size < 1 {
            return Err(EngineError::InvalidBenchSize);
        }
        let mut seen = std::collections::HashSet::new();
        for profile in pool {
            if !seen.insert(profile.id.as_str()) {
                return Err(EngineError::DuplicateAgentId(profile.id.clone()));
            }
        }
        let presiding = pool
            .iter()
            .find(|p| p.role == Role::PresidingJudge)
            .ok_or(EngineError::NoPresidingJudge)?
            .clone();

        let needed = self.config.bench_size - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = match self.config.composition {
            Some(composition) => {
                if composition.judges + composition.lay_judges != needed {
                    return Err(EngineError::CompositionMismatch {
                        judges: composition.judges,
                        lay_judges: composition.lay_judges,
                        bench_size: self.config.bench_size,
                    });
                }
                let judges: Vec<&AgentProfile> =
                    pool.iter().filter(|p| p.role == Role::Judge).collect();
                let lay: Vec<&AgentProfile> =
                    pool.iter().filter(|p| p.role == Role::LayJudge).collect();
                if judges.len() < composition.judges {
                    return Err(EngineError::PoolTooSmall {
                        what: "judges",
                        needed: composition.judges,
                        found: judges.len(),
                    });
                }
                if lay.len() < composition.lay_judges {
                    return Err(EngineError::PoolTooSmall {
                        what: "lay judges",
                        needed: composition.lay_judges,
                        found: lay.len(),
                    });
                }
                let mut members = sample(&mut rng, &judges, composition.judges);
                members.extend(sample(&mut rng, &lay, composition.lay_judges));
                members
            }
            None => {
                let candidates: Vec<&AgentProfile> = pool
                    .iter()
                    .filter(|p| p.role != Role::PresidingJudge)
                    .collect();
                if candidates.len() < needed {
                    return Err(EngineError::PoolTooSmall {
                        what: "non-presiding members",
                        needed,
                        found: candidates.len(),
                    });
                }
                sample(&mut rng, &candidates, needed)
            }
        };
        Ok(Bench { presiding, members })
    }

    /// Asks for an opinion, re-asking with a corrective reminder up to
    /// `parse_retries` times. `Ok(None)` means every attempt failed to
    /// parse; backend failures propagate.
    fn ask_opinion(&self, base: Vec<ChatMessage>) -> Result<Option<ParsedOpinion>, BackendError> {
        let mut messages = base;
        for _ in 0..=self.config.parse_retries {
            let reply = self.complete(messages.clone())?;
            match parse_opinion(&reply) {
                Ok(opinion) => return Ok(Some(opinion)),
                Err(err) => {
                    log::debug!("opinion parse failed: {err}");
                    messages.push(ChatMessage::assistant(reply));
                    messages.push(ChatMessage::user(RETRY_OPINION));
                }
            }
        }
        Ok(None)
    }

    /// Stage two: every bench agent (presiding judge first) proposes an
    /// initial sentence without seeing the others. Members whose output
    /// never parses are marked abstaining; an unparseable presiding judge
    /// fails the case.
    pub fn independent_sentencing(
        &self,
        bench: &Bench,
        case: &Case,
    ) -> Result<(OpinionSet, Vec<String>), EngineError> {
        let precedents = match (&self.memory, self.config.memory_enabled) {
            (Some(memory), true) => memory.recall(case, self.config.memory_recall),
            _ => Vec::new(),
        };
        let mut opinions = Vec::new();
        let mut abstentions = Vec::new();
        for agent in bench.agents() {
            let prompt = self
                .prompts
                .build_independent_sentencing_prompt(case, agent, &precedents);
            match self.ask_opinion(prompt)? {
                Some(parsed) => opinions.push(SentencingOpinion {
                    agent_id: agent.id.clone(),
                    term_months: parsed.term_months,
                    rationale: parsed.rationale,
                    round: 0,
                }),
                None if agent.role == Role::PresidingJudge => {
                    return Err(EngineError::PresidingUnparseable {
                        attempts: self.config.parse_retries + 1,
                    });
                }
                None => {
                    log::warn!("agent {} abstains: no parseable initial opinion", agent.id);
                    abstentions.push(agent.id.clone());
                }
            }
        }
        if !bench.members.is_empty() && abstentions.len() == bench.members.len() {
            return Err(EngineError::AllMembersAbstained);
        }
        Ok((OpinionSet { round: 0, opinions }, abstentions))
    }

    /// Asks the presiding judge whether the bench has converged. Parse
    /// failures are retried, then conservatively treated as no consensus;
    /// the boolean flag reports that fallback.
    pub fn evaluate_consensus(
        &self,
        presiding: &AgentProfile,
        opinions: &OpinionSet,
        statements: &[Statement],
        round_index: u32,
    ) -> Result<(ConsensusParse, bool), BackendError> {
        let mut messages =
            self.prompts
                .build_consensus_prompt(presiding, opinions, statements, round_index);
        for _ in 0..=self.config.parse_retries {
            let reply = self.complete(messages.clone())?;
            match parse_consensus(&reply) {
                Ok(parsed) => return Ok((parsed, false)),
                Err(err) => {
                    log::debug!("consensus parse failed: {err}");
                    messages.push(ChatMessage::assistant(reply));
                    messages.push(ChatMessage::user(RETRY_CONSENSUS));
                }
            }
        }
        Ok((
            ConsensusParse {
                consensus: false,
                summary: "consensus verdict was unparseable; treated as no consensus".to_string(),
            },
            true,
        ))
    }

    /// Runs one deliberation round over the active (non-abstaining) agents:
    /// statements in bench order with the presiding judge first, then the
    /// consensus evaluation, then (absent consensus) one update per agent.
    /// An agent whose update never parses carries its prior opinion forward
    /// verbatim.
    fn run_round(
        &self,
        case: &Case,
        active: &[&AgentProfile],
        current: &OpinionSet,
        prior_rounds: &[DeliberationRound],
        round_index: u32,
    ) -> Result<DeliberationRound, BackendError> {
        let mut statements: Vec<Statement> = Vec::new();
        for agent in active {
            let prompt = self.prompts.build_statement_prompt(
                case,
                agent,
                current,
                prior_rounds,
                &statements,
                round_index,
            );
            let text = self.complete(prompt)?;
            statements.push(Statement {
                agent_id: agent.id.clone(),
                text,
            });
        }

        let presiding = active[0];
        let (verdict, verdict_fallback) =
            self.evaluate_consensus(presiding, current, &statements, round_index)?;
        if verdict.consensus {
            return Ok(DeliberationRound {
                index: round_index,
                statements,
                verdict,
                verdict_fallback,
                updated_opinions: None,
            });
        }

        let mut updated = Vec::new();
        for agent in active {
            let own = current
                .get(&agent.id)
                .expect("active agent has a current opinion");
            let prompt =
                self.prompts
                    .build_update_prompt(case, agent, own, &statements, round_index);
            match self.ask_opinion(prompt)? {
                Some(parsed) => updated.push(SentencingOpinion {
                    agent_id: agent.id.clone(),
                    term_months: parsed.term_months,
                    rationale: parsed.rationale,
                    round: round_index,
                }),
                None => {
                    log::warn!(
                        "agent {} update unparseable in round {round_index}; carrying prior opinion forward",
                        agent.id
                    );
                    updated.push(own.clone());
                }
            }
        }
        Ok(DeliberationRound {
            index: round_index,
            statements,
            verdict,
            verdict_fallback,
            updated_opinions: Some(OpinionSet {
                round: round_index,
                opinions: updated,
            }),
        })
    }

    /// Lower median of the current terms: the tie-break takes the smaller
    /// of the two middle values.
    fn median_term(current: &OpinionSet) -> u32 {
        let mut terms = current.terms();
        terms.sort_unstable();
        terms[(terms.len() - 1) / 2]
    }

    /// Stage four. With a consensus verdict and unanimous terms the
    /// presiding judge ratifies without another sentencing call; otherwise
    /// one synthesis call resolves the final term. Unparseable synthesis
    /// falls back to the median of the current terms.
    fn synthesize_final(
        &self,
        presiding: &AgentProfile,
        current: &OpinionSet,
        rounds: &[DeliberationRound],
        consensus_reached: bool,
    ) -> Result<FinalJudgment, BackendError> {
        let rounds_used = rounds.len() as u32;
        if consensus_reached {
            if let Some(term) = current.unanimous_term() {
                let justification = rounds
                    .last()
                    .map(|r| r.verdict.summary.clone())
                    .unwrap_or_default();
                return Ok(FinalJudgment {
                    term_months: term,
                    justification,
                    consensus_reached: true,
                    rounds_used,
                    fallback: false,
                });
            }
        }
        let prompt = self
            .prompts
            .build_synthesis_prompt(presiding, current, rounds);
        match self.ask_opinion(prompt)? {
            Some(parsed) => Ok(FinalJudgment {
                term_months: parsed.term_months,
                justification: parsed.rationale,
                consensus_reached,
                rounds_used,
                fallback: false,
            }),
            None => {
                let term = Self::median_term(current);
                log::warn!("synthesis unparseable; falling back to median term {term}");
                Ok(FinalJudgment {
                    term_months: term,
                    justification:
                        "synthesis output was unparseable; median of the bench's current terms"
                            .to_string(),
                    consensus_reached,
                    rounds_used,
                    fallback: true,
                })
            }
        }
    }

    /// Runs the full pipeline for one case. On failure the error carries
    /// the transcript built so far (complete rounds only), so it can still
    /// be persisted.
    ///
    /// Backend-call budget: with `r = parse_retries`, a run issues at most
    /// `B + r * P` calls, where
    /// `B = bench_size + max_rounds * (2 * bench_size + 1) + 2` and
    /// `P = bench_size + max_rounds * (bench_size + 1) + 1` counts the
    /// parse sites (initial opinions, per-round consensus and updates, and
    /// the synthesis).
    pub fn run_case(
        &self,
        case: &Case,
        pool: &[AgentProfile],
    ) -> Result<Transcript, Box<CaseFailure>> {
        if self.config.max_rounds < 1 {
            return Err(Box::new(CaseFailure {
                error: EngineError::InvalidMaxRounds,
                transcript: None,
            }));
        }
        let seed = case_seed(self.config.seed, &case.id);
        let bench = self.select_bench(pool, seed).map_err(|error| {
            Box::new(CaseFailure {
                error,
                transcript: None,
            })
        })?;
        self.run_selected(case, bench).map_err(|boxed| {
            let (error, transcript) = *boxed;
            Box::new(CaseFailure {
                error,
                transcript: Some(transcript),
            })
        })
    }

    fn run_selected(
        &self,
        case: &Case,
        bench: Bench,
    ) -> Result<Transcript, Box<(EngineError, Transcript)>> {
        let mut transcript = Transcript::new(case.id.clone(), bench.clone());
        let fail = |err: EngineError, mut transcript: Transcript| {
            transcript.error = Some(err.to_string());
            Err(Box::new((err, transcript)))
        };

        let (initial, abstentions) = match self.independent_sentencing(&bench, case) {
            Ok(result) => result,
            Err(err) => return fail(err, transcript),
        };
        transcript.initial = initial.clone();
        transcript.abstentions = abstentions.clone();

        let active: Vec<&AgentProfile> = bench
            .agents()
            .filter(|a| !abstentions.contains(&a.id))
            .collect();
        let mut current = initial;
        let mut consensus_reached = false;

        for round_index in 1..=self.config.max_rounds {
            let round =
                match self.run_round(case, &active, &current, &transcript.rounds, round_index) {
                    Ok(round) => round,
                    Err(err) => return fail(err.into(), transcript),
                };
            let verdict_yes = round.verdict.consensus;
            if let Some(updated) = &round.updated_opinions {
                current = updated.clone();
            }
            transcript.rounds.push(round);
            if verdict_yes {
                consensus_reached = true;
                break;
            }
        }

        let judgment = match self.synthesize_final(
            &bench.presiding,
            &current,
            &transcript.rounds,
            consensus_reached,
        ) {
            Ok(judgment) => judgment,
            Err(err) => return fail(err.into(), transcript),
        };

        let summary_prompt = self.prompts.build_summary_prompt(
            &bench.presiding,
            judgment.term_months,
            &current,
            &transcript.rounds,
        );
        transcript.final_judgment = Some(judgment.clone());
        match self.complete(summary_prompt) {
            Ok(text) => transcript.closing_summary = Some(text),
            Err(err) => return fail(err.into(), transcript),
        }

        if self.config.memory_enabled {
            if let Some(memory) = &self.memory {
                memory.remember(case, &judgment);
            }
        }
        Ok(transcript)
    }

    /// Runs one single-call baseline: build the prompt, take one
    /// completion, extract the last term expression. `None` means the
    /// output carried no parseable term (scored as worst case downstream).
    pub fn run_baseline_case(
        &self,
        case: &Case,
        method: BaselineMethod,
    ) -> Result<Option<u32>, BackendError> {
        let prompt = self.prompts.build_baseline_prompt(case, method);
        let reply = self.complete(prompt)?;
        Ok(extract_prison_term_months(&reply))
    }

    /// The documented worst-case number of backend calls for this
    /// configuration (see [`Engine::run_case`]).
    pub fn call_budget(&self) -> u32 {
        let bench = self.config.bench_size as u32;
        let rounds = self.config.max_rounds;
        let retries = self.config.parse_retries;
        let base = bench + rounds * (2 * bench + 1) + 2;
        let parse_sites = bench + rounds * (bench + 1) + 1;
        base + retries * parse_sites
    }
}

/// Samples `k` candidates without replacement; the selection is seeded and
/// the chosen members keep their pool order.
fn sample(rng: &mut ChaCha8Rng, candidates: &[&AgentProfile], k: usize) -> Vec<AgentProfile> {
    let mut indices: Vec<usize> = (0..candidates.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices.sort_unstable();
    indices.into_iter().map(|i| candidates[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use types::{default_pool, BenchComposition};

    fn sample_case() -> Case {
        Case {
            id: "case-1".to_string(),
            fact: "被告人利用职务便利收受财物，并虚构事实骗取钱款。".to_string(),
            charge: "诈骗罪；受贿罪".to_string(),
            article: "第266条……第385条……".to_string(),
            gold_term_months: 58,
        }
    }

    fn engine_with(script: &[&str], config: EngineConfig) -> (Engine, Arc<ScriptedBackend>) {
        let backend = Arc::new(ScriptedBackend::from_strs(script));
        let engine = Engine::new(
            backend.clone(),
            Arc::new(PromptTemplateSet::builtin()),
            config,
            "test-model",
        );
        (engine, backend)
    }

    fn opinion_text(term: u32, reason: &str) -> String {
        format!("Sentence Term: {term} months\nReason: {reason}")
    }

    fn big_pool() -> Vec<AgentProfile> {
        let mut pool = vec![AgentProfile {
            id: "presiding".to_string(),
            role: Role::PresidingJudge,
            persona: String::new(),
            focus: String::new(),
        }];
        for i in 0..5 {
            pool.push(AgentProfile {
                id: format!("lay-{i}"),
                role: Role::LayJudge,
                persona: String::new(),
                focus: String::new(),
            });
        }
        pool
    }

    #[test]
    fn bench_selection_is_seed_deterministic() {
        let (engine, _) = engine_with(&[], EngineConfig::default());
        let pool = big_pool();
        let first = engine.select_bench(&pool, 42).unwrap();
        for _ in 0..100 {
            assert_eq!(engine.select_bench(&pool, 42).unwrap(), first);
        }
        assert_eq!(first.presiding.id, "presiding");
        assert_eq!(first.members.len(), 2);
    }

    #[test]
    fn bench_of_one_is_presiding_alone() {
        let config = EngineConfig {
            bench_size: 1,
            ..EngineConfig::default()
        };
        let (engine, _) = engine_with(&[], config);
        let bench = engine.select_bench(&big_pool(), 7).unwrap();
        assert!(bench.members.is_empty());
    }

    #[test]
    fn bench_selection_errors() {
        let config = EngineConfig {
            bench_size: 7,
            ..EngineConfig::default()
        };
        let (engine, _) = engine_with(&[], config);
        assert!(matches!(
            engine.select_bench(&big_pool(), 1),
            Err(EngineError::PoolTooSmall { .. })
        ));

        let (engine, _) = engine_with(&[], EngineConfig::default());
        let no_presiding: Vec<AgentProfile> = big_pool().into_iter().skip(1).collect();
        assert!(matches!(
            engine.select_bench(&no_presiding, 1),
            Err(EngineError::NoPresidingJudge)
        ));

        let mut dup = big_pool();
        dup[2].id = dup[1].id.clone();
        assert!(matches!(
            engine.select_bench(&dup, 1),
            Err(EngineError::DuplicateAgentId(_))
        ));
    }

    #[test]
    fn bench_selection_honors_composition() {
        let config = EngineConfig {
            composition: Some(BenchComposition {
                judges: 1,
                lay_judges: 1,
            }),
            ..EngineConfig::default()
        };
        let (engine, _) = engine_with(&[], config);
        let bench = engine.select_bench(&default_pool(), 3).unwrap();
        let roles: Vec<Role> = bench.members.iter().map(|m| m.role).collect();
        assert_eq!(roles, [Role::Judge, Role::LayJudge]);

        // A pool with no professional judges cannot satisfy the mix.
        let err = engine.select_bench(&big_pool(), 3).unwrap_err();
        assert!(matches!(
            err,
            EngineError::PoolTooSmall { what: "judges", .. }
        ));
    }

    #[test]
    fn independent_sentencing_parses_initial_opinions() {
        let script = [
            opinion_text(60, "deterrence"),
            opinion_text(48, "remorse"),
            opinion_text(54, "balance"),
        ];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, _) = engine_with(&refs, EngineConfig::default());
        let bench = engine.select_bench(&default_pool(), 0).unwrap();
        let (set, abstentions) = engine
            .independent_sentencing(&bench, &sample_case())
            .unwrap();
        assert!(abstentions.is_empty());
        assert_eq!(set.round, 0);
        let terms: Vec<(String, u32)> = set
            .opinions
            .iter()
            .map(|o| (o.agent_id.clone(), o.term_months))
            .collect();
        assert_eq!(terms[0].1, 60);
        assert!(terms.iter().any(|(id, t)| id == "judge-1" && *t == 48));
        assert!(terms.iter().any(|(id, t)| id == "lay-1" && *t == 54));
    }

    #[test]
    fn member_abstains_after_retry_exhaustion() {
        // judge-1 answers garbage twice (initial + one retry), lay-1 parses.
        let script = [
            opinion_text(60, "a"),
            "no term here".to_string(),
            "still nothing".to_string(),
            opinion_text(54, "c"),
        ];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, _) = engine_with(&refs, EngineConfig::default());
        let bench = engine.select_bench(&default_pool(), 0).unwrap();
        let (set, abstentions) = engine
            .independent_sentencing(&bench, &sample_case())
            .unwrap();
        assert_eq!(abstentions, vec!["judge-1".to_string()]);
        assert_eq!(set.opinions.len(), 2);
    }

    #[test]
    fn presiding_unparseable_fails_the_case() {
        let (engine, _) = engine_with(&["nope", "still nope"], EngineConfig::default());
        let bench = engine.select_bench(&default_pool(), 0).unwrap();
        let err = engine
            .independent_sentencing(&bench, &sample_case())
            .unwrap_err();
        assert!(matches!(
            err,
            EngineError::PresidingUnparseable { attempts: 2 }
        ));
    }

    #[test]
    fn all_members_abstaining_fails_the_case() {
        let script = [
            opinion_text(60, "a"),
            "x".to_string(),
            "x".to_string(),
            "x".to_string(),
            "x".to_string(),
        ];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, _) = engine_with(&refs, EngineConfig::default());
        let bench = engine.select_bench(&default_pool(), 0).unwrap();
        let err = engine
            .independent_sentencing(&bench, &sample_case())
            .unwrap_err();
        assert!(matches!(err, EngineError::AllMembersAbstained));
    }

    #[test]
    fn bench_of_one_produces_single_opinion() {
        let script = [opinion_text(36, "solo")];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let config = EngineConfig {
            bench_size: 1,
            ..EngineConfig::default()
        };
        let (engine, _) = engine_with(&refs, config);
        let bench = engine.select_bench(&default_pool(), 0).unwrap();
        let (set, _) = engine
            .independent_sentencing(&bench, &sample_case())
            .unwrap();
        assert_eq!(set.opinions.len(), 1);
    }

    #[test]
    fn consensus_fallback_after_unparseable_verdicts() {
        let (engine, _) = engine_with(&["???", "???"], EngineConfig::default());
        let presiding = default_pool()[0].clone();
        let opinions = OpinionSet {
            round: 1,
            opinions: vec![SentencingOpinion {
                agent_id: "presiding-1".to_string(),
                term_months: 54,
                rationale: String::new(),
                round: 1,
            }],
        };
        let (verdict, fallback) = engine
            .evaluate_consensus(&presiding, &opinions, &[], 1)
            .unwrap();
        assert!(!verdict.consensus);
        assert!(fallback);
        assert!(!verdict.summary.is_empty());
    }

    /// The full deliberation fixture: three initial opinions (60/48/54),
    /// round-one statements and a negative verdict, three 54-month updates,
    /// round-two statements and a positive verdict, then the closing
    /// summary. Fifteen entries drive the whole case.
    pub(crate) fn full_deliberation_script() -> Vec<String> {
        let path = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/fixtures/deliberation_script.json"
        );
        let content = std::fs::read_to_string(path).expect("fixture script exists");
        serde_json::from_str(&content).expect("fixture script is a JSON string array")
    }

    #[test]
    fn full_deliberation_replay() {
        let script = full_deliberation_script();
        assert_eq!(script.len(), 15);
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, backend) = engine_with(&refs, EngineConfig::default());
        let transcript = engine.run_case(&sample_case(), &default_pool()).unwrap();

        let judgment = transcript.final_judgment.as_ref().unwrap();
        assert_eq!(judgment.term_months, 54);
        assert!(judgment.consensus_reached);
        assert_eq!(judgment.rounds_used, 2);
        assert!(!judgment.fallback);

        assert_eq!(transcript.rounds.len(), 2);
        assert!(!transcript.rounds[0].verdict.consensus);
        assert!(transcript.rounds[0]
            .verdict
            .summary
            .contains("significant differences"));
        let updates = transcript.rounds[0].updated_opinions.as_ref().unwrap();
        assert_eq!(updates.terms(), vec![54, 54, 54]);
        assert!(transcript.rounds[1].verdict.consensus);
        assert!(transcript.rounds[1].updated_opinions.is_none());
        assert!(transcript.closing_summary.is_some());
        assert_eq!(backend.calls_made(), 15);
        assert_eq!(backend.remaining(), 0);

        // Statements preserve bench order with the presiding judge first.
        for round in &transcript.rounds {
            let speakers: Vec<&str> = round
                .statements
                .iter()
                .map(|s| s.agent_id.as_str())
                .collect();
            assert_eq!(speakers, ["presiding-1", "judge-1", "lay-1"]);
        }
        // Round indices are 1..rounds_used with no gaps.
        for (i, round) in transcript.rounds.iter().enumerate() {
            assert_eq!(round.index, i as u32 + 1);
        }
    }

    #[test]
    fn early_consensus_stops_after_one_round_without_updates() {
        let script = [
            opinion_text(54, "a"),
            opinion_text(54, "b"),
            opinion_text(54, "c"),
            "opening statement".to_string(),
            "member statement".to_string(),
            "lay statement".to_string(),
            "Conclusion: Yes\nAll positions already agree at 54 months.".to_string(),
            "closing summary".to_string(),
        ];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, backend) = engine_with(&refs, EngineConfig::default());
        let transcript = engine.run_case(&sample_case(), &default_pool()).unwrap();
        let judgment = transcript.final_judgment.unwrap();
        assert_eq!(judgment.term_months, 54);
        assert_eq!(judgment.rounds_used, 1);
        // 3 initial + 3 statements + 1 verdict + 1 summary; no update calls
        // and no extra sentencing call on ratification.
        assert_eq!(backend.calls_made(), 8);
    }

    #[test]
    fn exhausted_rounds_fall_through_to_synthesis() {
        let mut script = vec![
            opinion_text(60, "a"),
            opinion_text(48, "b"),
            opinion_text(54, "c"),
        ];
        for round in 1..=3 {
            script.push(format!("round {round} opening"));
            script.push(format!("round {round} member view"));
            script.push(format!("round {round} lay view"));
            script.push("Conclusion: No\nStill apart.".to_string());
            script.push(opinion_text(60, "unmoved"));
            script.push(opinion_text(48, "unmoved"));
            script.push(opinion_text(54, "unmoved"));
        }
        script.push("刑期：50个月\n理由：折中各方意见。".to_string());
        script.push("closing summary".to_string());
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, backend) = engine_with(&refs, EngineConfig::default());
        let transcript = engine.run_case(&sample_case(), &default_pool()).unwrap();
        let judgment = transcript.final_judgment.unwrap();
        assert_eq!(judgment.term_months, 50);
        assert!(!judgment.consensus_reached);
        assert_eq!(judgment.rounds_used, 3);
        assert_eq!(backend.calls_made(), 3 + 3 * 7 + 2);
        assert!(backend.calls_made() as u32 <= engine.call_budget());
    }

    #[test]
    fn unparseable_update_carries_opinion_forward() {
        let script = [
            opinion_text(60, "a"),
            opinion_text(48, "keep me"),
            opinion_text(54, "c"),
            "s1".to_string(),
            "s2".to_string(),
            "s3".to_string(),
            "Conclusion: No\nApart.".to_string(),
            opinion_text(58, "revised"),
            "garbage".to_string(),
            "more garbage".to_string(),
            opinion_text(54, "kept"),
            "s1".to_string(),
            "s2".to_string(),
            "s3".to_string(),
            "Conclusion: Yes\nDone.".to_string(),
            "刑期：56个月\n理由：接近多数意见。".to_string(),
            "summary".to_string(),
        ];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, _) = engine_with(&refs, EngineConfig::default());
        let transcript = engine.run_case(&sample_case(), &default_pool()).unwrap();
        let updates = transcript.rounds[0].updated_opinions.as_ref().unwrap();
        let carried = updates.get("judge-1").unwrap();
        assert_eq!(carried.term_months, 48);
        assert_eq!(carried.rationale, "keep me");
        assert_eq!(
            carried.round, 0,
            "carried opinion is verbatim, round included"
        );
        // Consensus was yes with non-unanimous terms, so one synthesis call ran.
        let judgment = transcript.final_judgment.unwrap();
        assert_eq!(judgment.term_months, 56);
        assert!(judgment.consensus_reached);
    }

    #[test]
    fn synthesis_fallback_takes_lower_median() {
        let mut script = vec![
            opinion_text(60, "a"),
            opinion_text(48, "b"),
            opinion_text(54, "c"),
        ];
        script.push("s1".to_string());
        script.push("s2".to_string());
        script.push("s3".to_string());
        script.push("Conclusion: No\nApart.".to_string());
        script.push(opinion_text(60, "x"));
        script.push(opinion_text(48, "y"));
        script.push(opinion_text(54, "z"));
        // Synthesis output garbage twice (initial + retry), then summary.
        script.push("no verdict".to_string());
        script.push("still none".to_string());
        script.push("summary".to_string());
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let config = EngineConfig {
            max_rounds: 1,
            ..EngineConfig::default()
        };
        let (engine, _) = engine_with(&refs, config);
        let transcript = engine.run_case(&sample_case(), &default_pool()).unwrap();
        let judgment = transcript.final_judgment.unwrap();
        assert_eq!(judgment.term_months, 54, "median of 48, 54, 60");
        assert!(judgment.fallback);
        assert!(!judgment.consensus_reached);
    }

    #[test]
    fn median_tie_break_takes_lower() {
        let set = |terms: &[u32]| OpinionSet {
            round: 1,
            opinions: terms
                .iter()
                .enumerate()
                .map(|(i, t)| SentencingOpinion {
                    agent_id: format!("a{i}"),
                    term_months: *t,
                    rationale: String::new(),
                    round: 1,
                })
                .collect(),
        };
        assert_eq!(Engine::median_term(&set(&[48, 60])), 48);
        assert_eq!(Engine::median_term(&set(&[48, 54, 60])), 54);
        assert_eq!(Engine::median_term(&set(&[10, 20, 30, 40])), 20);
    }

    #[test]
    fn backend_failure_preserves_partial_transcript() {
        // Script ends right after the first round's statements.
        let script = [
            opinion_text(60, "a"),
            opinion_text(48, "b"),
            opinion_text(54, "c"),
            "s1".to_string(),
        ];
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let (engine, _) = engine_with(&refs, EngineConfig::default());
        let failure = engine
            .run_case(&sample_case(), &default_pool())
            .unwrap_err();
        let transcript = failure.transcript.as_ref().unwrap();
        assert_eq!(transcript.initial.opinions.len(), 3);
        assert!(
            transcript.rounds.is_empty(),
            "incomplete round is not recorded"
        );
        assert!(transcript.error.is_some());
        assert!(matches!(failure.error, EngineError::Backend(_)));
    }

    #[test]
    fn baseline_examples() {
        let (engine, _) = engine_with(&["判处有期徒刑五年"], EngineConfig::default());
        assert_eq!(
            engine
                .run_baseline_case(&sample_case(), BaselineMethod::Standard)
                .unwrap(),
            Some(60)
        );

        let (engine, _) = engine_with(
            &["经过分析，本案量刑应从重。综合来看，所以刑期为48个月。"],
            EngineConfig::default(),
        );
        assert_eq!(
            engine
                .run_baseline_case(&sample_case(), BaselineMethod::Cot)
                .unwrap(),
            Some(48)
        );

        let (engine, _) = engine_with(&["I cannot answer that."], EngineConfig::default());
        assert_eq!(
            engine
                .run_baseline_case(&sample_case(), BaselineMethod::Ls)
                .unwrap(),
            None
        );
    }

    #[test]
    fn determinism_byte_identical_transcripts() {
        let run = || {
            let script = full_deliberation_script();
            let refs: Vec<&str> = script.iter().map(String::as_str).collect();
            let (engine, _) = engine_with(
                &refs,
                EngineConfig {
                    seed: 7,
                    ..EngineConfig::default()
                },
            );
            let transcript = engine.run_case(&sample_case(), &big_pool()).unwrap();
            serde_json::to_vec_pretty(&transcript).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn memory_round_trip_through_run() {
        let script = full_deliberation_script();
        let refs: Vec<&str> = script.iter().map(String::as_str).collect();
        let memory = Arc::new(PrecedentMemory::new());
        let config = EngineConfig {
            memory_enabled: true,
            ..EngineConfig::default()
        };
        let backend = Arc::new(ScriptedBackend::from_strs(&refs));
        let engine = Engine::new(
            backend,
            Arc::new(PromptTemplateSet::builtin()),
            config,
            "test-model",
        )
        .with_memory(memory.clone());
        engine.run_case(&sample_case(), &default_pool()).unwrap();
        assert_eq!(memory.len(), 1);
        let recalled = memory.recall(&sample_case(), 1);
        assert_eq!(recalled[0].term_months, 54);
    }

    #[test]
    fn case_seed_is_stable_and_id_sensitive() {
        assert_eq!(case_seed(1, "a"), case_seed(1, "a"));
        assert_ne!(case_seed(1, "a"), case_seed(1, "b"));
        assert_ne!(case_seed(1, "a"), case_seed(2, "a"));
    }
}
