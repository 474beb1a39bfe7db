//! How the estimated support evolves: fixed-weight shrinkage activates
//! nearly every coordinate before pruning back (a false-positive phase),
//! while the integral controller starts saturated and admits coordinates
//! strongest-first, building the support from below.
//!
//! ```bash
//! cargo run --release --example support_evolution
//! ```

use istakit::solvers::{self, Algorithm, SolverConfig};
use istakit::{experiment, ExperimentSpec};

fn main() {
    let spec = ExperimentSpec::protocol(210, 1, 5);
    let problem = experiment::generate_instance(&spec, 0).expect("valid protocol spec");
    let truth = problem.x_true().expect("synthetic instance").clone();
    let true_l0 = truth.l0();
    println!("true support size: {true_l0}\n");

    let checkpoints = [1usize, 2, 5, 10, 20, 50, 100, 200, 400];
    for algorithm in [Algorithm::Ista, Algorithm::IIsta] {
        let config = SolverConfig::protocol_defaults(algorithm, &problem).expect("protocol m");
        let result = solvers::solve(&problem, &config).expect("solver runs");
        println!("{} ({} iterations):", algorithm.name(), result.iterations);
        println!("  {:>6} {:>6} {:>14}", "k", "l0", "support_error");
        for &k in &checkpoints {
            if let Some(row) = result.trace.rows.iter().find(|r| r.k == k) {
                println!(
                    "  {:>6} {:>6} {:>14}",
                    row.k,
                    row.l0,
                    row.support_error.map(|e| e.to_string()).unwrap_or_default()
                );
            }
        }
        let last = result.trace.last().expect("nonempty trace");
        println!("  {:>6} {:>6} {:>14}   (final)\n", last.k, last.l0, last.support_error.unwrap());
    }
}
