//! One live deliberated case against an OpenAI-compatible endpoint.
//!
//! Requires `OPENAI_API_KEY` (and optionally `MODEL`, `BASE_URL`); exits
//! quietly when no key is configured.
//!
//! ```bash
//! OPENAI_API_KEY=... MODEL=gpt-4o-mini cargo run --example live_run
//! ```

use std::path::Path;
use std::sync::Arc;

use collegial_bench::dataset::{load_cases, DatasetConfig};
use collegial_bench::engine::types::default_pool;
use collegial_bench::engine::Engine;
use collegial_bench::evaluation::performance_score;
use collegial_bench::prompts::PromptTemplateSet;
use collegial_bench::runner::format_transcript;
use collegial_bench::{BackendConfig, EngineConfig, HttpBackend};

fn main() -> anyhow::Result<()> {
    if std::env::var("OPENAI_API_KEY")
        .map(|k| k.is_empty())
        .unwrap_or(true)
    {
        println!("OPENAI_API_KEY is not set; skipping the live run.");
        return Ok(());
    }
    let model = std::env::var("MODEL").unwrap_or_else(|_| "gpt-4o-mini".to_string());
    let mut backend_config = BackendConfig::default();
    if let Ok(base_url) = std::env::var("BASE_URL") {
        backend_config.base_url = base_url;
    }

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let case = load_cases(
        &fixtures.join("sample_case.jsonl"),
        &DatasetConfig::default(),
    )?
    .remove(0);

    let engine = Engine::new(
        Arc::new(HttpBackend::new(backend_config)?),
        Arc::new(PromptTemplateSet::builtin()),
        EngineConfig::default(),
        model,
    );
    match engine.run_case(&case, &default_pool()) {
        Ok(transcript) => {
            print!("{}", format_transcript(&transcript));
            if let Some(judgment) = &transcript.final_judgment {
                let performance =
                    performance_score(Some(judgment.term_months), case.gold_term_months, 300)?;
                println!(
                    "\nPerformance vs gold {}: {performance:.4}",
                    case.gold_term_months
                );
            }
        }
        Err(failure) => {
            eprintln!("live case failed: {failure}");
            if let Some(transcript) = &failure.transcript {
                print!("{}", format_transcript(transcript));
            }
        }
    }
    Ok(())
}
