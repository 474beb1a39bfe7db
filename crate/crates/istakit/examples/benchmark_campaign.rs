//! A small multi-seed campaign: generate random instances, run every
//! solver on each, and aggregate convergence and support-stabilization
//! statistics. The full 100-run protocol is available through the CLI
//! (`istakit bench`); this example keeps it to ten runs so it finishes in
//! a few seconds.
//!
//! ```bash
//! cargo run --release --example benchmark_campaign
//! ```

use istakit::experiment::{self, CampaignOptions};
use istakit::solvers::Algorithm;
use istakit::ExperimentSpec;

fn main() {
    let spec = ExperimentSpec::protocol(210, 10, 2024).with_solvers(&[
        Algorithm::Ista,
        Algorithm::Fista,
        Algorithm::AdIsta,
        Algorithm::AdFista,
        Algorithm::IIsta,
    ]);
    println!(
        "campaign: m={} n={} sparsity={} runs={} (gradient descent omitted: it needs ~5e4 iterations per run)",
        spec.m, spec.n, spec.sparsity, spec.num_runs
    );
    let report =
        experiment::run_campaign(&spec, &CampaignOptions::default()).expect("campaign runs");

    println!(
        "\n{:<10} {:>12} {:>12} {:>14} {:>10}",
        "algorithm", "conv_mean", "supp_stab", "rel_error", "diverged"
    );
    for (name, agg) in &report.algorithms {
        println!(
            "{:<10} {:>12.1} {:>12.1} {:>14.2e} {:>10}",
            name,
            agg.conv_mean.unwrap_or(f64::NAN),
            agg.supp_stab_mean.unwrap_or(f64::NAN),
            agg.final_rel_error_mean.unwrap_or(f64::NAN),
            agg.defined_counts.diverged
        );
    }
    println!("\nthe integral controller converges in ISTA-like time but stabilizes its");
    println!("support an order of magnitude earlier, with error at the stop-criterion floor");
}
