//! The ℓ1 bias and its removal: fixed shrinkage weights leave a systematic
//! offset in the recovered coefficients, while the leaky integral law
//! drives the weights to zero and lands on the unregularized minimizer.
//!
//! ```bash
//! cargo run --release --example bias_vs_integral_control
//! ```

use istakit::solvers::{self, Algorithm, SolverConfig};
use istakit::{analysis, experiment, ExperimentSpec};

fn main() {
    let spec = ExperimentSpec::protocol(210, 1, 99);
    let problem = experiment::generate_instance(&spec, 0).expect("valid protocol spec");
    let truth = problem.x_true().expect("synthetic instance").clone();

    for algorithm in [Algorithm::Ista, Algorithm::IIsta] {
        let config = SolverConfig::protocol_defaults(algorithm, &problem).expect("protocol m");
        let result = solvers::solve(&problem, &config).expect("solver runs");
        let report = analysis::equilibrium_report(&problem, &result, 1e-6).expect("report");
        let rel = result.final_x.distance(&truth) / truth.l2();
        println!("{}:", algorithm.name());
        println!("  relative error      {rel:.3e}");
        println!("  |grad f|_inf        {:.3e}", report.grad_inf_norm);
        println!("  |lambda|_inf        {:.3e}", result.final_lambda.linf());
        println!("  unbiased at 1e-6    {}", report.is_unbiased);
        // per-coordinate view of the bias on the true support
        let mut offsets: Vec<f64> = truth
            .iter()
            .zip(result.final_x.iter())
            .filter(|(t, _)| **t != 0.0)
            .map(|(t, x)| (x - t).abs())
            .collect();
        offsets.sort_by(|a, b| b.partial_cmp(a).unwrap());
        println!("  largest coefficient offset on the support: {:.3e}\n", offsets[0]);
    }
    println!("the fixed-weight solver plateaus at an offset of roughly tau*lambda per");
    println!("coordinate; the integral controller decays lambda and removes it entirely");
}
