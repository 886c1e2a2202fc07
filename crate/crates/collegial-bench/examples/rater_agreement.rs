//! Inter-rater reliability (pairwise Cohen's kappa) and majority-vote
//! quality rates from a three-rater annotation file.
//!
//! ```bash
//! cargo run --example rater_agreement
//! ```

use std::path::Path;

use collegial_bench::evaluation::{
    pairwise_mean_kappa, quality_rates, read_annotations, Criterion,
};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/annotations.csv");
    let annotations = read_annotations(&path)?;
    println!("{} annotations from {}", annotations.len(), path.display());

    for criterion in Criterion::ALL {
        let kappa = pairwise_mean_kappa(&annotations, criterion)?;
        println!("{:>10} pairwise mean kappa: {kappa:+.4}", criterion.name());
    }
    println!();
    for (criterion, rate) in quality_rates(&annotations)? {
        println!("{criterion:>10} majority-vote rate: {rate:.1}%");
    }
    Ok(())
}
