//! Scoring predictions with the normalized log distance and rendering the
//! comparison grid.
//!
//! ```bash
//! cargo run --example metric_scoring
//! ```

use collegial_bench::evaluation::{
    aggregate_performance, nlog_distance, performance_score, render_report, MetricResult,
    ReportFormat, RunSummary,
};

fn main() -> anyhow::Result<()> {
    println!("Distance grows with the log of the miss, capped at max_diff = 300:");
    for (predicted, gold) in [(58, 58), (54, 58), (34, 58), (118, 58), (358, 58)] {
        let distance = nlog_distance(predicted, gold, 300)?;
        let performance = performance_score(Some(predicted), gold, 300)?;
        println!("  predicted {predicted:>3}, gold {gold}: distance {distance:.4}, performance {performance:.4}");
    }
    println!(
        "  missing prediction: performance {:.4}",
        performance_score(None, 58, 300)?
    );

    let results = vec![
        MetricResult::compute("a", Some(58), 58, 300)?,
        MetricResult::compute("b", Some(54), 58, 300)?,
        MetricResult::compute("c", None, 58, 300)?,
    ];
    println!(
        "\nMean performance: {:.2}%",
        aggregate_performance(&results)?
    );

    let summaries = vec![
        RunSummary {
            method: "standard".into(),
            model: "demo-model".into(),
            mean_performance_pct: 75.13,
            legality_pct: None,
            logicality_pct: None,
            morality_pct: None,
            cases: 500,
            unparsed: 4,
        },
        RunSummary {
            method: "bench".into(),
            model: "demo-model".into(),
            mean_performance_pct: 80.81,
            legality_pct: Some(55.3),
            logicality_pct: Some(55.2),
            morality_pct: Some(72.1),
            cases: 500,
            unparsed: 1,
        },
    ];
    println!("\n{}", render_report(&summaries, ReportFormat::TableText)?);
    Ok(())
}
