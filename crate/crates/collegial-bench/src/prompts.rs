//! Prompt construction for every message the framework sends.
//!
//! Each stage has a template with a fixed set of `{{placeholder}}` slots and
//! an output-format contract string the term parser understands. Templates
//! ship with built-in defaults and can be overridden from a directory of
//! UTF-8 text files, one per stage. The gold term is not a slot anywhere,
//! so no prompt can leak it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::ChatMessage;
use crate::dataset::Case;
use crate::engine::memory::PrecedentEntry;
use crate::engine::types::{
    AgentProfile, DeliberationRound, OpinionSet, Role, SentencingOpinion, Statement,
};

/// The three single-call prompting baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Standard,
    Cot,
    Ls,
}

/// Every prompt stage with a template of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    RolePresiding,
    RoleJudge,
    RoleLay,
    BaselineStandard,
    BaselineCot,
    BaselineLs,
    Independent,
    StatementPresiding,
    StatementMember,
    Consensus,
    Update,
    Synthesis,
    Summary,
}

impl Stage {
    pub const ALL: [Stage; 13] = [
        Stage::RolePresiding,
        Stage::RoleJudge,
        Stage::RoleLay,
        Stage::BaselineStandard,
        Stage::BaselineCot,
        Stage::BaselineLs,
        Stage::Independent,
        Stage::StatementPresiding,
        Stage::StatementMember,
        Stage::Consensus,
        Stage::Update,
        Stage::Synthesis,
        Stage::Summary,
    ];

    /// Template file name inside a template directory.
    pub fn file_name(&self) -> &'static str {
        match self {
            Stage::RolePresiding => "role_presiding.txt",
            Stage::RoleJudge => "role_judge.txt",
            Stage::RoleLay => "role_lay.txt",
            Stage::BaselineStandard => "baseline_standard.txt",
            Stage::BaselineCot => "baseline_cot.txt",
            Stage::BaselineLs => "baseline_ls.txt",
            Stage::Independent => "independent.txt",
            Stage::StatementPresiding => "statement_presiding.txt",
            Stage::StatementMember => "statement_member.txt",
            Stage::Consensus => "consensus.txt",
            Stage::Update => "update.txt",
            Stage::Synthesis => "synthesis.txt",
            Stage::Summary => "summary.txt",
        }
    }

    /// The documented placeholder set for this stage; loaded templates must
    /// use exactly these slots.
    pub fn placeholders(&self) -> &'static [&'static str] {
        match self {
            Stage::RolePresiding | Stage::RoleJudge | Stage::RoleLay => &["persona", "focus"],
            Stage::BaselineStandard | Stage::BaselineCot | Stage::BaselineLs => {
                &["fact", "charge", "article"]
            }
            Stage::Independent => &["fact", "charge", "article", "precedents"],
            Stage::StatementPresiding => {
                &["fact", "charge", "article", "round", "opinions", "history"]
            }
            Stage::StatementMember => &[
                "fact",
                "charge",
                "article",
                "round",
                "opinions",
                "history",
                "current_statements",
            ],
            Stage::Consensus => &["round", "opinions", "statements"],
            Stage::Update => &[
                "fact",
                "charge",
                "article",
                "round",
                "own_term",
                "own_rationale",
                "statements",
            ],
            Stage::Synthesis => &["opinions", "history"],
            Stage::Summary => &["final_term", "opinions", "history"],
        }
    }

    /// The output-format contract string every rendering of this stage must
    /// contain. The term parser and these strings evolve together.
    pub fn format_contract(&self) -> &'static str {
        match self {
            Stage::RolePresiding => "Conclusion:",
            Stage::RoleJudge => "legal principles",
            Stage::RoleLay => "societal impact",
            Stage::BaselineStandard
            | Stage::BaselineCot
            | Stage::BaselineLs
            | Stage::Independent
            | Stage::Update
            | Stage::Synthesis => OPINION_CONTRACT,
            Stage::Consensus => CONSENSUS_CONTRACT,
            Stage::StatementPresiding | Stage::StatementMember | Stage::Summary => "plain prose",
        }
    }

    fn builtin(&self) -> &'static str {
        match self {
            Stage::RolePresiding => ROLE_PRESIDING,
            Stage::RoleJudge => ROLE_JUDGE,
            Stage::RoleLay => ROLE_LAY,
            Stage::BaselineStandard => BASELINE_STANDARD,
            Stage::BaselineCot => BASELINE_COT,
            Stage::BaselineLs => BASELINE_LS,
            Stage::Independent => INDEPENDENT,
            Stage::StatementPresiding => STATEMENT_PRESIDING,
            Stage::StatementMember => STATEMENT_MEMBER,
            Stage::Consensus => CONSENSUS,
            Stage::Update => UPDATE,
            Stage::Synthesis => SYNTHESIS,
            Stage::Summary => SUMMARY,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.file_name().trim_end_matches(".txt"))
    }
}

/// Opinion output marker the parser reads back.
pub const OPINION_CONTRACT: &str = "刑期：X个月";
/// Consensus verdict marker the parser reads back.
pub const CONSENSUS_CONTRACT: &str = "Conclusion:";

/// Corrective reminder appended when an opinion fails to parse.
pub const RETRY_OPINION: &str =
    "你的上一次回答不符合要求的格式。请严格按照以下格式重新作答：\n刑期：X个月\n理由：<你的理由>";
/// Corrective reminder appended when a consensus verdict fails to parse.
pub const RETRY_CONSENSUS: &str = "Your previous reply did not follow the required format. Reply again beginning with exactly \"Conclusion: Yes\" or \"Conclusion: No\", followed by the summary of agreement or disagreement.";

const ROLE_PRESIDING: &str = "\
You are the presiding judge of a collegial bench hearing a criminal case.
{{persona}}
{{focus}}
You preside over the deliberation: moderate the discussion, summarize each member's position, pose focused questions, and hold every judgment to legal principles and sentencing standards.
When asked to evaluate whether the bench has reached consensus, reply beginning with exactly \"Conclusion: Yes\" or \"Conclusion: No\", followed by a summary of the main points of agreement or disagreement.
";

const ROLE_JUDGE: &str = "\
You are a professional judge serving on a collegial bench hearing a criminal case.
{{persona}}
{{focus}}
Ground every position in the applicable legal articles, sentencing guidelines, and established legal principles, and cite the statutory basis for the term you support.
";

const ROLE_LAY: &str = "\
You are a lay judge serving on a collegial bench hearing a criminal case.
{{persona}}
{{focus}}
Bring the perspective of the community: weigh societal impact, ethical considerations, and public trust alongside the law when you reason about the sentence.
";

const BASELINE_STANDARD: &str = "\
Decide the prison term for the criminal case below.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}

Output only the prison term, with no explanation, in exactly this format:
刑期：X个月
";

const BASELINE_COT: &str = "\
Decide the prison term for the criminal case below.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}

Let's think step by step, and finish with the final term on the last line in exactly this format:
刑期：X个月
";

const BASELINE_LS: &str = "\
Legal syllogism structures a judgment as follows: the major premise is the applicable legal article, the minor premise is the facts of the case, and the conclusion is the judgment reached by applying the article to the facts.

Apply legal syllogism to decide the prison term for the criminal case below.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}

Work through the syllogism, and finish with the final term on the last line in exactly this format:
刑期：X个月
";

const INDEPENDENT: &str = "\
Review the case below independently and propose an initial sentence. Do not refer to, anticipate, or defer to the views of any other bench member; this is your own evaluation.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}
{{precedents}}
Propose a prison term in months and document the rationale behind your decision. Reply in exactly this format:
刑期：X个月
理由：<the rationale behind your decision>
";

const STATEMENT_PRESIDING: &str = "\
Deliberation round {{round}}.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}

Current sentencing opinions of the bench:
{{opinions}}

Discussion so far:
{{history}}

Open this round of deliberation: summarize each member's position and rationale in your own words, then pose the focused questions the panel must resolve to move toward consensus. Speak in plain prose; this statement is not a formal revision of your sentence.
";

const STATEMENT_MEMBER: &str = "\
Deliberation round {{round}}.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}

Current sentencing opinions of the bench:
{{opinions}}

Discussion so far:
{{history}}

Statements already made this round:
{{current_statements}}

Respond to the prior statements: address the points and questions they raise, defend or adjust your reasoning, and engage the other members' arguments directly. Speak in plain prose; this statement is not a formal revision of your sentence.
";

const CONSENSUS: &str = "\
Deliberation round {{round}} has concluded its statements.

Current sentencing opinions of the bench:
{{opinions}}

Statements made this round:
{{statements}}

As presiding judge, determine whether the bench has reached consensus. Consider not only how close the proposed terms are, but whether the arguments themselves have become coherent and convergent. Reply beginning with exactly \"Conclusion: Yes\" or \"Conclusion: No\", then summarize the main points of agreement or disagreement.
";

const UPDATE: &str = "\
Deliberation round {{round}} has concluded.

Case facts:
{{fact}}

Charge: {{charge}}
Applicable law: {{article}}

Your current opinion: {{own_term}} months.
Your rationale: {{own_rationale}}

Statements made this round:
{{statements}}

Reconsider your sentence in light of the discussion. You may keep your current term with further justification, or revise it; either way, explain what in the discussion you weighed. Reply in exactly this format:
刑期：X个月
理由：<your updated rationale>
";

const SYNTHESIS: &str = "\
Deliberation has ended without a unanimous term. As presiding judge you must weigh all contributions and determine the final judgment.

Final sentencing opinions of the bench:
{{opinions}}

Complete discussion history:
{{history}}

Weigh every member's arguments, identify the recurring themes, and integrate the professional and lay perspectives into one final prison term with a comprehensive justification. Reply in exactly this format:
刑期：X个月
理由：<comprehensive justification for the final judgment>
";

const SUMMARY: &str = "\
The bench has reached its final judgment: {{final_term}} months.

Final sentencing opinions of the bench:
{{opinions}}

Complete discussion history:
{{history}}

Write the closing summary of the panel discussion in plain prose: how the initial positions differed, how the discussion evolved, and why the panel settled on the final term.
";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {stage}: placeholder {{{{{name}}}}} is not documented for this stage")]
    UnknownPlaceholder { stage: String, name: String },
    #[error("template {stage}: documented placeholder {{{{{name}}}}} is missing")]
    MissingPlaceholder { stage: String, name: String },
    #[error("template {stage}: output-format contract {contract:?} is missing")]
    MissingContract { stage: String, contract: String },
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").expect("placeholder regex"))
}

fn placeholder_names(template: &str) -> BTreeSet<String> {
    placeholder_regex()
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .collect()
}

fn validate_template(stage: Stage, template: &str) -> Result<(), PromptError> {
    let found = placeholder_names(template);
    let documented: BTreeSet<String> = stage.placeholders().iter().map(|s| s.to_string()).collect();
    if let Some(name) = found.difference(&documented).next() {
        return Err(PromptError::UnknownPlaceholder {
            stage: stage.to_string(),
            name: name.clone(),
        });
    }
    if let Some(name) = documented.difference(&found).next() {
        return Err(PromptError::MissingPlaceholder {
            stage: stage.to_string(),
            name: name.clone(),
        });
    }
    if !template.contains(stage.format_contract()) {
        return Err(PromptError::MissingContract {
            stage: stage.to_string(),
            contract: stage.format_contract().to_string(),
        });
    }
    Ok(())
}

fn render(template: &str, bindings: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in bindings {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    debug_assert!(
        !placeholder_regex().is_match(&out),
        "unbound placeholder left in rendered prompt"
    );
    out
}

/// The full set of stage templates plus rendering settings.
#[derive(Debug, Clone)]
pub struct PromptTemplateSet {
    templates: BTreeMap<Stage, String>,
    /// Discussion history beyond this many characters is truncated, oldest
    /// rounds first.
    pub history_char_budget: usize,
}

impl Default for PromptTemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptTemplateSet {
    /// The built-in default templates.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        for stage in Stage::ALL {
            templates.insert(stage, stage.builtin().to_string());
        }
        Self {
            templates,
            history_char_budget: 16_000,
        }
    }

    /// Loads templates from a directory, falling back to the built-in
    /// default for any stage file that is absent. Every loaded template is
    /// validated against its stage's placeholder set and format contract.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::builtin();
        for stage in Stage::ALL {
            let path = dir.join(stage.file_name());
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                validate_template(stage, &text)?;
                set.templates.insert(stage, text);
            }
        }
        Ok(set)
    }

    /// Writes every current template into `dir` as editable files.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (stage, text) in &self.templates {
            std::fs::write(dir.join(stage.file_name()), text)?;
        }
        Ok(())
    }

    /// SHA-256 of each template, keyed by stage name, for run manifests.
    pub fn template_hashes(&self) -> BTreeMap<String, String> {
        self.templates
            .iter()
            .map(|(stage, text)| {
                let digest = Sha256::digest(text.as_bytes());
                (stage.to_string(), hex::encode(digest))
            })
            .collect()
    }

    fn template(&self, stage: Stage) -> &str {
        &self.templates[&stage]
    }

    /// The role-conditioned system message for one agent.
    pub fn build_role_system_prompt(&self, profile: &AgentProfile) -> ChatMessage {
        let stage = match profile.role {
            Role::PresidingJudge => Stage::RolePresiding,
            Role::Judge => Stage::RoleJudge,
            Role::LayJudge => Stage::RoleLay,
        };
        let text = render(
            self.template(stage),
            &[("persona", &profile.persona), ("focus", &profile.focus)],
        );
        ChatMessage::system(text)
    }

    /// One of the three single-call baseline prompts.
    pub fn build_baseline_prompt(&self, case: &Case, method: BaselineMethod) -> Vec<ChatMessage> {
        let stage = match method {
            BaselineMethod::Standard => Stage::BaselineStandard,
            BaselineMethod::Cot => Stage::BaselineCot,
            BaselineMethod::Ls => Stage::BaselineLs,
        };
        let text = render(self.template(stage), &case_bindings(case));
        vec![ChatMessage::user(text)]
    }

    /// Stage prompt for an agent's independent initial sentence.
    pub fn build_independent_sentencing_prompt(
        &self,
        case: &Case,
        profile: &AgentProfile,
        precedents: &[PrecedentEntry],
    ) -> Vec<ChatMessage> {
        let precedents_text = render_precedents(precedents);
        let mut bindings = case_bindings(case);
        bindings.push(("precedents", &precedents_text));
        let text = render(self.template(Stage::Independent), &bindings);
        vec![
            self.build_role_system_prompt(profile),
            ChatMessage::user(text),
        ]
    }

    /// Stage prompt for one agent's statement in a deliberation round. The
    /// presiding judge opens the round; members also see the statements
    /// already made this round.
    pub fn build_statement_prompt(
        &self,
        case: &Case,
        profile: &AgentProfile,
        opinions: &OpinionSet,
        prior_rounds: &[DeliberationRound],
        current_statements: &[Statement],
        round_index: u32,
    ) -> Vec<ChatMessage> {
        assert!(round_index >= 1, "round_index starts at 1");
        let round_text = round_index.to_string();
        let opinions_text = render_opinions(opinions);
        let history_text = render_history(prior_rounds, self.history_char_budget);
        let stage = match profile.role {
            Role::PresidingJudge => Stage::StatementPresiding,
            _ => Stage::StatementMember,
        };
        let current_text = render_statements(current_statements);
        let mut bindings = case_bindings(case);
        bindings.push(("round", &round_text));
        bindings.push(("opinions", &opinions_text));
        bindings.push(("history", &history_text));
        if stage == Stage::StatementMember {
            bindings.push(("current_statements", &current_text));
        }
        let text = render(self.template(stage), &bindings);
        vec![
            self.build_role_system_prompt(profile),
            ChatMessage::user(text),
        ]
    }

    /// Stage prompt for the presiding judge's consensus evaluation.
    pub fn build_consensus_prompt(
        &self,
        presiding: &AgentProfile,
        opinions: &OpinionSet,
        statements: &[Statement],
        round_index: u32,
    ) -> Vec<ChatMessage> {
        let round_text = round_index.to_string();
        let opinions_text = render_opinions(opinions);
        let statements_text = render_statements(statements);
        let text = render(
            self.template(Stage::Consensus),
            &[
                ("round", round_text.as_str()),
                ("opinions", opinions_text.as_str()),
                ("statements", statements_text.as_str()),
            ],
        );
        vec![
            self.build_role_system_prompt(presiding),
            ChatMessage::user(text),
        ]
    }

    /// Stage prompt asking one agent to reconsider its sentence after a
    /// round without consensus.
    pub fn build_update_prompt(
        &self,
        case: &Case,
        profile: &AgentProfile,
        own: &SentencingOpinion,
        statements: &[Statement],
        round_index: u32,
    ) -> Vec<ChatMessage> {
        let round_text = round_index.to_string();
        let own_term = own.term_months.to_string();
        let statements_text = render_statements(statements);
        let mut bindings = case_bindings(case);
        bindings.push(("round", &round_text));
        bindings.push(("own_term", &own_term));
        bindings.push(("own_rationale", &own.rationale));
        bindings.push(("statements", &statements_text));
        let text = render(self.template(Stage::Update), &bindings);
        vec![
            self.build_role_system_prompt(profile),
            ChatMessage::user(text),
        ]
    }

    /// Stage prompt for the presiding judge's final synthesis when the
    /// terms do not already agree.
    pub fn build_synthesis_prompt(
        &self,
        presiding: &AgentProfile,
        final_opinions: &OpinionSet,
        rounds: &[DeliberationRound],
    ) -> Vec<ChatMessage> {
        let opinions_text = render_opinions(final_opinions);
        let history_text = render_history(rounds, self.history_char_budget);
        let text = render(
            self.template(Stage::Synthesis),
            &[
                ("opinions", opinions_text.as_str()),
                ("history", history_text.as_str()),
            ],
        );
        vec![
            self.build_role_system_prompt(presiding),
            ChatMessage::user(text),
        ]
    }

    /// Stage prompt for the closing summary of the panel discussion.
    pub fn build_summary_prompt(
        &self,
        presiding: &AgentProfile,
        final_term: u32,
        final_opinions: &OpinionSet,
        rounds: &[DeliberationRound],
    ) -> Vec<ChatMessage> {
        let term_text = final_term.to_string();
        let opinions_text = render_opinions(final_opinions);
        let history_text = render_history(rounds, self.history_char_budget);
        let text = render(
            self.template(Stage::Summary),
            &[
                ("final_term", term_text.as_str()),
                ("opinions", opinions_text.as_str()),
                ("history", history_text.as_str()),
            ],
        );
        vec![
            self.build_role_system_prompt(presiding),
            ChatMessage::user(text),
        ]
    }
}

fn case_bindings(case: &Case) -> Vec<(&'static str, &str)> {
    // The gold term is deliberately not a binding: prompts cannot leak it.
    vec![
        ("fact", case.fact.as_str()),
        ("charge", case.charge.as_str()),
        ("article", case.article.as_str()),
    ]
}

fn render_opinions(set: &OpinionSet) -> String {
    if set.opinions.is_empty() {
        return "(no opinions recorded)".to_string();
    }
    set.opinions
        .iter()
        .map(|o| {
            format!(
                "- {}: {} months. Rationale: {}",
                o.agent_id, o.term_months, o.rationale
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_precedents(precedents: &[PrecedentEntry]) -> String {
    if precedents.is_empty() {
        return String::new();
    }
    let mut text = String::from("\nPrecedents you recall from similar cases:\n");
    for entry in precedents {
        text.push_str(&format!(
            "- {} ({} months)\n",
            entry.summary, entry.term_months
        ));
    }
    text
}

fn render_statements(statements: &[Statement]) -> String {
    if statements.is_empty() {
        return "(none yet)".to_string();
    }
    statements
        .iter()
        .map(|s| format!("[{}] {}", s.agent_id, s.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Renders prior rounds oldest first, dropping whole oldest rounds (and
/// finally leading text) to stay within the character budget.
fn render_history(rounds: &[DeliberationRound], budget: usize) -> String {
    if rounds.is_empty() {
        return "(no prior rounds)".to_string();
    }
    let mut blocks: Vec<String> = rounds
        .iter()
        .map(|round| {
            let verdict = if round.verdict.consensus { "Yes" } else { "No" };
            format!(
                "--- Round {} ---\n{}\nConsensus evaluation: {}. {}",
                round.index,
                render_statements(&round.statements),
                verdict,
                round.verdict.summary
            )
        })
        .collect();

    let total_chars = |blocks: &[String]| -> usize {
        blocks.iter().map(|b| b.chars().count()).sum::<usize>() + 2 * blocks.len().saturating_sub(1)
    };
    let mut truncated = false;
    while blocks.len() > 1 && total_chars(&blocks) > budget {
        blocks.remove(0);
        truncated = true;
    }
    let mut text = blocks.join("\n\n");
    let char_count = text.chars().count();
    if char_count > budget {
        let skip = char_count - budget;
        text = text.chars().skip(skip).collect();
        truncated = true;
    }
    if truncated {
        format!("[earlier discussion truncated]\n{text}")
    } else {
        text
    }
}
