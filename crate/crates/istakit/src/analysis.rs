//! Numerical certification of the integral controller's theory: the
//! unbiased-equilibrium conditions, the contraction coefficient of the
//! joint (x, λ) map, and the per-step contraction inequality observed on
//! real trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector};
use crate::metrics;
use crate::problem::{ProblemError, ProblemInstance};
use crate::solvers::{
    self, Algorithm, IterateState, LambdaMode, RunResult, SolverConfig, SolverError,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("contraction certificates apply to the integral controller, got {0}")]
    WrongAlgorithm(Algorithm),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Sufficient-condition arithmetic for the joint (x, λ) map:
///   σ² = max{(1 − τμ)², (1 − τβ)²}
///   ξ² = max{σ² + k_i²β², τ² + (1 − α)²}
/// The map is certified contractive (squared joint distance shrinking by
/// 2ξ² per step) when ξ² < ½ and τ < 2/β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub sigma_sq: f64,
    pub xi_sq: f64,
    pub sufficient_condition_holds: bool,
    /// 2ξ², the per-step factor on the squared joint distance.
    pub contraction_factor: f64,
    /// α > |k_i|, the hypothesis of the unbiased-equilibrium result.
    pub equilibrium_hypothesis_holds: bool,
}

/// Evaluates the certificate for an integral-controller config on an
/// instance with known (μ, β). Pure arithmetic; no trajectory is run.
pub fn certificate(
    p: &ProblemInstance,
    c: &SolverConfig,
) -> Result<ContractionCertificate, AnalysisError> {
    if c.algorithm != Algorithm::IIsta {
        return Err(AnalysisError::WrongAlgorithm(c.algorithm));
    }
    Ok(certificate_from_constants(p.mu(), p.beta(), c.tau, c.ki, c.alpha))
}

/// Certificate arithmetic from raw constants, for callers that already
/// know (μ, β).
pub fn certificate_from_constants(
    mu: f64,
    beta: f64,
    tau: f64,
    ki: f64,
    alpha: f64,
) -> ContractionCertificate {
    let a = (1.0 - tau * mu).powi(2);
    let b = (1.0 - tau * beta).powi(2);
    let sigma_sq = a.max(b);
    let xi_sq = (sigma_sq + ki * ki * beta * beta).max(tau * tau + (1.0 - alpha).powi(2));
    ContractionCertificate {
        sigma_sq,
        xi_sq,
        sufficient_condition_holds: xi_sq < 0.5 && tau < 2.0 / beta,
        contraction_factor: 2.0 * xi_sq,
        equilibrium_hypothesis_holds: alpha > ki.abs(),
    }
}

/// Joint squared distance D(k) = ‖x(k) − x⋆‖₂² + ‖λ(k) − λ⋆‖₂².
fn joint_sq_distance(state: &(DenseVector, DenseVector), fixed: &(DenseVector, DenseVector)) -> f64 {
    let dx = state.0.distance(&fixed.0);
    let dl = state.1.distance(&fixed.1);
    dx * dx + dl * dl
}

/// Observed per-step contraction ratios along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionMonitor {
    /// ρ(k) = D(k+1)/D(k) for each consecutive pair, ending early if the
    /// trajectory lands exactly on the fixed point.
    pub ratios: Vec<f64>,
    pub max_ratio: Option<f64>,
}

/// Computes D(k+1)/D(k) along a recorded (x, λ) state sequence against a
/// fixed point. The sequence should include the initial state.
pub fn monitor_contraction(
    states: &[(DenseVector, DenseVector)],
    fixed_point: &(DenseVector, DenseVector),
) -> ContractionMonitor {
    let mut ratios = Vec::new();
    for pair in states.windows(2) {
        let d0 = joint_sq_distance(&pair[0], fixed_point);
        if d0 == 0.0 {
            break;
        }
        let d1 = joint_sq_distance(&pair[1], fixed_point);
        ratios.push(d1 / d0);
    }
    let max_ratio = ratios.iter().copied().fold(None, |m: Option<f64>, r| {
        Some(m.map_or(r, |m| m.max(r)))
    });
    ContractionMonitor { ratios, max_ratio }
}

/// Runs the configured solver and collects the full (x, λ) state sequence,
/// including the initial state, for contraction monitoring.
pub fn run_with_states(
    p: &ProblemInstance,
    c: &SolverConfig,
    x0: &DenseVector,
    lambda_init: &DenseVector,
) -> Result<(RunResult, Vec<(DenseVector, DenseVector)>), SolverError> {
    let mut states = vec![(x0.clone(), lambda_init.clone())];
    let result = solvers::run(p, c, x0, lambda_init, |s: &IterateState| {
        states.push((s.x.clone(), s.lambda.clone()));
    })?;
    Ok((result, states))
}

/// High-precision fixed point of the integral controller: the same config
/// run to a 1e-14 stop with a 10⁶ cap. Works uniformly for both lambda
/// modes, unlike solving the equilibrium equations algebraically.
pub fn fixed_point(
    p: &ProblemInstance,
    c: &SolverConfig,
) -> Result<(DenseVector, DenseVector), SolverError> {
    let mut tight = c.clone();
    tight.stop_tol = 1e-14;
    tight.max_iters = 1_000_000;
    let r = solvers::solve(p, &tight)?;
    Ok((r.final_x, r.final_lambda))
}

/// Whether a converged run landed on the unbiased equilibrium: gradient and
/// weights both at zero within tolerance, and (when the truth is known)
/// support recovered. The support comparison thresholds the estimate at
/// `tol`, the same scale the unbiasedness claim is evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub grad_inf_norm: f64,
    pub lambda_inf_norm: f64,
    pub is_unbiased: bool,
    pub support_matches_truth: Option<bool>,
}

pub fn equilibrium_report(
    p: &ProblemInstance,
    result: &RunResult,
    tol: f64,
) -> Result<EquilibriumReport, AnalysisError> {
    let grad = crate::problem::gradient(p, &result.final_x)?;
    let grad_inf_norm = grad.linf();
    let lambda_inf_norm = result.final_lambda.linf();
    let support_matches_truth = p.x_true().map(|t| {
        metrics::support(&result.final_x, tol) == metrics::support(t, 0.0)
    });
    Ok(EquilibriumReport {
        grad_inf_norm,
        lambda_inf_norm,
        is_unbiased: grad_inf_norm <= tol && lambda_inf_norm <= tol,
        support_matches_truth,
    })
}

/// A hand-checkable instance on which the sufficient condition holds:
/// A = 2I makes τ = 1/β cancel the gradient-map Lipschitz bound entirely
/// (σ = 0), and with α = 0.9, k_i = 0.01,
///   ξ² = max{0 + 0.0016, 0.0625 + 0.01} = 0.0725 < ½.
pub fn engineered_contraction_instance(
    n: usize,
    sparsity: usize,
    seed: u64,
) -> Result<(ProblemInstance, SolverConfig), AnalysisError> {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let a = DenseMatrix::diagonal(&vec![2.0; n]).expect("positive size");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut x = vec![0.0; n];
    for &i in idx.iter().take(sparsity.min(n)) {
        let mag: f64 = rng.gen_range(1.0..2.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x[i] = sign * mag;
    }
    let x_true = DenseVector::new(x).expect("finite");
    let y = crate::linalg::matvec(&a, &x_true).map_err(ProblemError::from)?;
    let p = ProblemInstance::new(a, y, Some(x_true), Some(seed))?;
    let g0 = crate::problem::gradient(&p, &DenseVector::zeros(n))?;
    let lambda0 =
        DenseVector::from_raw(vec![solvers::INTEGRAL_LAMBDA0_SCALE * g0.linf(); n]);
    let config = SolverConfig {
        algorithm: Algorithm::IIsta,
        tau: 1.0 / p.beta(),
        lambda0,
        ki: 0.01,
        alpha: 0.9,
        epsilon: solvers::DEFAULT_EPSILON,
        stop_tol: solvers::STOP_TOL,
        max_iters: solvers::MAX_ITERS,
        lambda_mode: LambdaMode::default(),
        support_threshold: solvers::SUPPORT_THRESHOLD_PROX,
    };
    Ok((p, config))
}
