//! Replay a full bench deliberation from a scripted-responses file.
//!
//! Three agents (a presiding judge, a professional judge, and a lay judge)
//! open at 60, 48, and 54 months, fail to agree in round one, converge on
//! 54 months in round two, and the presiding judge ratifies the consensus.
//!
//! ```bash
//! cargo run --example replay_deliberation
//! ```

use std::path::Path;
use std::sync::Arc;

use collegial_bench::dataset::{load_cases, DatasetConfig};
use collegial_bench::engine::types::default_pool;
use collegial_bench::engine::Engine;
use collegial_bench::evaluation::performance_score;
use collegial_bench::prompts::PromptTemplateSet;
use collegial_bench::runner::format_transcript;
use collegial_bench::{EngineConfig, ScriptedBackend};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let case = load_cases(
        &fixtures.join("sample_case.jsonl"),
        &DatasetConfig::default(),
    )?
    .remove(0);
    let script: Vec<String> = serde_json::from_str(&std::fs::read_to_string(
        fixtures.join("deliberation_script.json"),
    )?)?;

    let backend = Arc::new(ScriptedBackend::new(script));
    let engine = Engine::new(
        backend.clone(),
        Arc::new(PromptTemplateSet::builtin()),
        EngineConfig::default(),
        "scripted-demo",
    );

    let transcript = engine
        .run_case(&case, &default_pool())
        .map_err(|failure| anyhow::anyhow!("replay failed: {failure}"))?;
    print!("{}", format_transcript(&transcript));

    let judgment = transcript.final_judgment.expect("judgment present");
    let performance = performance_score(Some(judgment.term_months), case.gold_term_months, 300)?;
    println!(
        "\nGold term: {} months; performance score {:.4} over {} backend calls",
        case.gold_term_months,
        performance,
        backend.calls_made()
    );
    Ok(())
}
