//! Recover a sparse vector from noiseless random linear measurements with
//! the integral-controlled solver.
//!
//! ```bash
//! cargo run --release --example recover_sparse_signal
//! ```

use istakit::solvers::{self, Algorithm, SolverConfig};
use istakit::{experiment, metrics, ExperimentSpec};

fn main() {
    // 210 Gaussian measurements of a 10-sparse vector in R^200
    let spec = ExperimentSpec::protocol(210, 1, 7);
    let problem = experiment::generate_instance(&spec, 0).expect("valid protocol spec");
    let truth = problem.x_true().expect("synthetic instance").clone();
    println!(
        "instance: m={} n={} ||x_true||_0={} beta={:.3}",
        problem.num_measurements(),
        problem.dim(),
        truth.l0(),
        problem.beta()
    );

    let config = SolverConfig::protocol_defaults(Algorithm::IIsta, &problem)
        .expect("m=210 has protocol defaults");
    let result = solvers::solve(&problem, &config).expect("solver runs");
    let summary = metrics::summarize(&result.trace, config.stop_tol);

    let rel = result.final_x.distance(&truth) / truth.l2();
    println!(
        "converged={} after {} iterations (support stable from {:?})",
        result.converged, result.iterations, summary.support_stab_iter
    );
    println!(
        "relative error {:.3e}, final weights |lambda|_inf = {:.3e}",
        rel,
        result.final_lambda.linf()
    );
    let recovered = metrics::support(&result.final_x, 1e-6);
    let expected = metrics::support(&truth, 0.0);
    println!(
        "support recovered exactly: {}",
        if recovered == expected { "yes" } else { "no" }
    );
}
