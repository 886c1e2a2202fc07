//! The three single-call prompting baselines (standard, chain-of-thought,
//! legal syllogism) built for one case, then executed against a scripted
//! backend to show term extraction from each answer style.
//!
//! ```bash
//! cargo run --example baseline_prompts
//! ```

use std::path::Path;
use std::sync::Arc;

use collegial_bench::dataset::{load_cases, DatasetConfig};
use collegial_bench::engine::Engine;
use collegial_bench::prompts::{BaselineMethod, PromptTemplateSet};
use collegial_bench::{EngineConfig, ScriptedBackend};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let case = load_cases(
        &fixtures.join("sample_case.jsonl"),
        &DatasetConfig::default(),
    )?
    .remove(0);
    let templates = PromptTemplateSet::builtin();

    for (name, method) in [
        ("standard", BaselineMethod::Standard),
        ("cot", BaselineMethod::Cot),
        ("ls", BaselineMethod::Ls),
    ] {
        let prompt = templates.build_baseline_prompt(&case, method);
        println!("=== {name} prompt ===\n{}\n", prompt[0].content);
    }

    // Scripted answers in three styles; extraction normalizes all of them.
    let script = vec![
        "刑期：57个月".to_string(),
        "先看事实，再看法条。综合全案，刑期应为四年九个月。所以刑期为57个月。".to_string(),
        "大前提：第266条与第385条。小前提：受贿28900元并诈骗300000元。结论：判处有期徒刑57个月。"
            .to_string(),
    ];
    let backend = Arc::new(ScriptedBackend::new(script));
    let engine = Engine::new(
        backend,
        Arc::new(PromptTemplateSet::builtin()),
        EngineConfig::default(),
        "scripted-demo",
    );
    for method in [
        BaselineMethod::Standard,
        BaselineMethod::Cot,
        BaselineMethod::Ls,
    ] {
        let predicted = engine.run_baseline_case(&case, method)?;
        println!(
            "{method:?} predicted: {predicted:?} months (gold {})",
            case.gold_term_months
        );
    }
    Ok(())
}
