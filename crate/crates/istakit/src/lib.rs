//! Proximal gradient solvers for sparse least squares, built around a
//! feedback-controlled variant of iterative shrinkage-thresholding whose
//! per-coordinate weights evolve under a leaky integral law driven by the
//! gradient. The controller removes the usual ℓ1 bias: at its equilibrium
//! the weights vanish and the iterate sits on the unregularized minimizer,
//! while the transient thresholds keep every iterate sparse.
//!
//! The crate ships six solvers behind one stepping interface (gradient
//! descent, ISTA, FISTA, log-penalty adaptive ISTA/FISTA, and the integral
//! controller), numerical certification of the controller's equilibrium
//! and contraction theory, a reproducible Gaussian benchmark harness, and
//! a thin CLI (`istakit`) over the same machinery.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release --example recover_sparse_signal
//! cargo run --release --example compare_solvers
//! cargo run --release --example bias_vs_integral_control
//! cargo run --release --example support_evolution
//! cargo run --release --example contraction_certificate
//! cargo run --release --example benchmark_campaign
//! cargo run --release --example trajectory_plot_data
//! ```

pub mod analysis;
pub mod cli;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod prox;
pub mod solvers;

pub use analysis::{
    certificate, engineered_contraction_instance, equilibrium_report, monitor_contraction,
    ContractionCertificate, ContractionMonitor, EquilibriumReport,
};
pub use experiment::{generate_instance, run_campaign, CampaignOptions, ExperimentSpec, SolverSpec};
pub use linalg::{DenseMatrix, DenseVector};
pub use metrics::{aggregate, summarize, support, support_error, IterationTrace, RunSummary};
pub use problem::{composite_objective, gradient, objective, Objective, ProblemInstance};
pub use prox::{soft_threshold, ThresholdVector};
pub use solvers::{run, solve, Algorithm, IterateState, LambdaMode, RunResult, SolverConfig};
