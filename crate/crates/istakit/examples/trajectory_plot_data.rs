//! Emit the (‖x(k)‖₁, ‖Ax(k) − y‖₂) trajectory of each solver on one
//! instance as CSV, ready for plotting. The integral controller traces a
//! near-straight line from the origin-side start to the true vector —
//! residual decrease and ℓ1 growth stay in balance the whole way.
//!
//! ```bash
//! cargo run --release --example trajectory_plot_data [OUT_DIR]
//! ```

use std::io::Write;

use istakit::solvers::{self, Algorithm, SolverConfig};
use istakit::{experiment, ExperimentSpec};

fn main() -> std::io::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "trajectory_data".into());
    std::fs::create_dir_all(&out_dir)?;

    let spec = ExperimentSpec::protocol(210, 1, 46);
    let problem = experiment::generate_instance(&spec, 0).expect("valid protocol spec");
    let truth = problem.x_true().expect("synthetic instance");
    println!("target point: l1 = {:.4}, residual = 0", truth.l1());

    for algorithm in Algorithm::ALL {
        let config = SolverConfig::protocol_defaults(algorithm, &problem).expect("protocol m");
        let result = solvers::solve(&problem, &config).expect("solver runs");
        let path = format!("{out_dir}/res_vs_l1_{}.csv", algorithm.name());
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(file, "k,l1,residual")?;
        for row in &result.trace.rows {
            writeln!(file, "{},{:.12e},{:.12e}", row.k, row.l1, row.residual)?;
        }
        println!(
            "{:<10} {:>6} points -> {}",
            algorithm.name(),
            result.trace.len(),
            path
        );
    }
    println!("\nplot residual against l1 (one curve per file); the integral-controlled");
    println!("curve is the nearly straight descent into the true vector");
    Ok(())
}
