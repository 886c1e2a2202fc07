//! Seeded bench selection from an agent pool, plus the role-conditioned
//! system prompts each selected agent deliberates under.
//!
//! ```bash
//! cargo run --example bench_selection
//! ```

use std::path::Path;
use std::sync::Arc;

use collegial_bench::engine::types::load_agent_pool;
use collegial_bench::engine::Engine;
use collegial_bench::prompts::PromptTemplateSet;
use collegial_bench::{EngineConfig, ScriptedBackend};

fn main() -> anyhow::Result<()> {
    let pool_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/agent_pool.jsonl");
    let pool = load_agent_pool(&pool_path)?;
    println!("Pool of {} agents:", pool.len());
    for profile in &pool {
        println!("  {} ({})", profile.id, profile.role.label());
    }

    let templates = Arc::new(PromptTemplateSet::builtin());
    let engine = Engine::new(
        Arc::new(ScriptedBackend::new(vec!["unused".into()])),
        templates.clone(),
        EngineConfig::default(),
        "demo",
    );

    for seed in [1, 2, 1] {
        let bench = engine.select_bench(&pool, seed)?;
        let members: Vec<&str> = bench.members.iter().map(|m| m.id.as_str()).collect();
        println!(
            "seed {seed}: presiding {} + members {}",
            bench.presiding.id,
            members.join(", ")
        );
    }
    println!("(the same seed always draws the same bench)\n");

    let bench = engine.select_bench(&pool, 1)?;
    for agent in bench.agents() {
        let system = templates.build_role_system_prompt(agent);
        println!("--- system prompt for {} ---\n{}", agent.id, system.content);
    }
    Ok(())
}
