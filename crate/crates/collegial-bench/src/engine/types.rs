//! Domain types for the deliberation engine: agent profiles, benches,
//! opinions, rounds, and transcripts. Everything here serializes to the
//! run-directory schema, so field order and contents are deterministic.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::term_parser::ConsensusParse;

/// Judicial role an agent plays on the bench.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    PresidingJudge,
    Judge,
    LayJudge,
}

impl Role {
    pub fn label(&self) -> &'static str {
        match self {
            Role::PresidingJudge => "presiding judge",
            Role::Judge => "judge",
            Role::LayJudge => "lay judge",
        }
    }
}

/// One agent in the pool: a role plus the persona and focus that condition
/// its prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub persona: String,
    #[serde(default)]
    pub focus: String,
}

/// The selected panel: exactly one presiding judge plus the other members
/// in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bench {
    pub presiding: AgentProfile,
    pub members: Vec<AgentProfile>,
}

impl Bench {
    /// All bench agents, presiding judge first.
    pub fn agents(&self) -> impl Iterator<Item = &AgentProfile> {
        std::iter::once(&self.presiding).chain(self.members.iter())
    }

    pub fn size(&self) -> usize {
        1 + self.members.len()
    }
}

/// One agent's sentencing position at a given round (0 = the independent
/// initial opinion). An opinion carried forward after a failed update keeps
/// its original round number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencingOpinion {
    pub agent_id: String,
    pub term_months: u32,
    pub rationale: String,
    pub round: u32,
}

/// The bench's opinions at one point in time, one entry per non-abstaining
/// agent in bench order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionSet {
    pub round: u32,
    pub opinions: Vec<SentencingOpinion>,
}

impl OpinionSet {
    pub fn get(&self, agent_id: &str) -> Option<&SentencingOpinion> {
        self.opinions.iter().find(|o| o.agent_id == agent_id)
    }

    pub fn terms(&self) -> Vec<u32> {
        self.opinions.iter().map(|o| o.term_months).collect()
    }

    /// The single term shared by every opinion, if they all agree.
    pub fn unanimous_term(&self) -> Option<u32> {
        let mut terms = self.opinions.iter().map(|o| o.term_months);
        let first = terms.next()?;
        terms.all(|t| t == first).then_some(first)
    }
}

/// One agent's contribution to a round's discussion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub agent_id: String,
    pub text: String,
}

/// One completed deliberation round: the statements in speaking order
/// (presiding judge first), the consensus verdict, and the updated opinions
/// when the verdict was negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliberationRound {
    pub index: u32,
    pub statements: Vec<Statement>,
    pub verdict: ConsensusParse,
    /// Set when the verdict text was unparseable and the conservative
    /// no-consensus default was applied.
    pub verdict_fallback: bool,
    pub updated_opinions: Option<OpinionSet>,
}

/// The presiding judge's final decision for a case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalJudgment {
    pub term_months: u32,
    pub justification: String,
    pub consensus_reached: bool,
    pub rounds_used: u32,
    /// Set when the synthesis output was unparseable and the median of the
    /// current terms was used instead.
    pub fallback: bool,
}

/// The full record of one case's deliberation, persisted one file per case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub case_id: String,
    pub bench: Bench,
    pub initial: OpinionSet,
    /// Agents whose initial opinion never parsed; they take no further part
    /// in the deliberation.
    pub abstentions: Vec<String>,
    pub rounds: Vec<DeliberationRound>,
    pub closing_summary: Option<String>,
    #[serde(rename = "final")]
    pub final_judgment: Option<FinalJudgment>,
    pub error: Option<String>,
}

impl Transcript {
    pub fn new(case_id: impl Into<String>, bench: Bench) -> Self {
        Self {
            case_id: case_id.into(),
            bench,
            initial: OpinionSet {
                round: 0,
                opinions: Vec::new(),
            },
            abstentions: Vec::new(),
            rounds: Vec::new(),
            closing_summary: None,
            final_judgment: None,
            error: None,
        }
    }

    pub fn rounds_used(&self) -> u32 {
        self.rounds.len() as u32
    }
}

/// Member-role mix of a bench, excluding the presiding judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchComposition {
    pub judges: usize,
    pub lay_judges: usize,
}

/// Knobs for one engine run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Total bench size including the presiding judge.
    pub bench_size: usize,
    pub max_rounds: u32,
    /// Corrective re-asks allowed per parse site.
    pub parse_retries: u32,
    pub seed: u64,
    pub memory_enabled: bool,
    /// Precedents recalled into the independent-sentencing prompt.
    pub memory_recall: usize,
    /// When set, members are sampled per role; otherwise uniformly from all
    /// non-presiding profiles.
    pub composition: Option<BenchComposition>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            bench_size: 3,
            max_rounds: 3,
            parse_retries: 1,
            seed: 0,
            memory_enabled: false,
            memory_recall: 3,
            composition: None,
        }
    }
}

/// Loads an agent pool file: JSON lines with fields id, role, persona, focus.
pub fn load_agent_pool(path: &Path) -> anyhow::Result<Vec<AgentProfile>> {
    let content = fs::read_to_string(path)?;
    let mut pool = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let profile: AgentProfile = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("agent pool line {}: {e}", idx + 1))?;
        pool.push(profile);
    }
    Ok(pool)
}

/// Built-in default pool: a presiding judge, a professional judge, and a
/// lay judge, mirroring the default bench size of three.
pub fn default_pool() -> Vec<AgentProfile> {
    vec![
        AgentProfile {
            id: "presiding-1".to_string(),
            role: Role::PresidingJudge,
            persona: "A senior judge with twenty years of criminal trial experience.".to_string(),
            focus: "Sentencing consistency and the deterrent effect of judgments.".to_string(),
        },
        AgentProfile {
            id: "judge-1".to_string(),
            role: Role::Judge,
            persona: "A career judge specializing in economic crime.".to_string(),
            focus: "Statutory sentencing ranges and mitigating circumstances.".to_string(),
        },
        AgentProfile {
            id: "lay-1".to_string(),
            role: Role::LayJudge,
            persona: "A retired teacher serving as a people's assessor.".to_string(),
            focus: "Community values and the social impact of the judgment.".to_string(),
        },
    ]
}
