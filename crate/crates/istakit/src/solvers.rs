//! The six solver state machines behind one stepping interface: plain
//! gradient descent, ISTA, FISTA, the log-penalty adaptive variants, and
//! ISTA with leaky integral control of the threshold vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseVector;
use crate::metrics::{self, IterationTrace};
use crate::problem::{Objective, ProblemInstance};
use crate::prox::{soft_threshold_scalar, ProxError};

/// Benchmark-protocol defaults.
pub const STOP_TOL: f64 = 1e-10;
pub const MAX_ITERS: usize = 50_000;
pub const DEFAULT_KI: f64 = 1e-3;
pub const DEFAULT_EPSILON: f64 = 1e-2;
/// Fixed weight for the plain ℓ1 solvers.
pub const LAMBDA_L1: f64 = 1e-3;
/// Initial weight for the log-penalty adaptive solvers.
pub const LAMBDA_LOG: f64 = 3e-3;
/// Integral control starts with λ(0) at this fraction of ‖∇f(x(0))‖∞, so
/// the first iterates stay sparse and the support activates strongest-first
/// as the thresholds leak away.
pub const INTEGRAL_LAMBDA0_SCALE: f64 = 0.6;
/// Support threshold used in trace metrics for the prox-family solvers:
/// well below the unit signal floor of the benchmark protocol and far above
/// the 1e-10 stop scale, so marginal activations do not pollute support
/// statistics.
pub const SUPPORT_THRESHOLD_PROX: f64 = 3e-2;
/// Gradient descent never produces exact zeros; its support is thresholded
/// at this level.
pub const SUPPORT_THRESHOLD_GRAD: f64 = 1e-6;
/// Divergence guard: abort when the iterate norm passes this.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Grad,
    Ista,
    Fista,
    AdIsta,
    AdFista,
    IIsta,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Grad,
        Algorithm::Ista,
        Algorithm::Fista,
        Algorithm::AdIsta,
        Algorithm::AdFista,
        Algorithm::IIsta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Grad => "grad",
            Algorithm::Ista => "ista",
            Algorithm::Fista => "fista",
            Algorithm::AdIsta => "ad-ista",
            Algorithm::AdFista => "ad-fista",
            Algorithm::IIsta => "i-ista",
        }
    }

    pub fn uses_momentum(&self) -> bool {
        matches!(self, Algorithm::Fista | Algorithm::AdFista)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let canon = s.to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .iter()
            .find(|a| a.name() == canon)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm {s:?}; valid names: {}", names.join(", "))
            })
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the integral controller keeps the threshold vector nonnegative. The
/// leaky integral update can drive components negative when the raw
/// gradient is integrated; both resolutions are implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Integrate |∇f| elementwise: regulates the gradient magnitude to zero
    /// and keeps λ ≥ 0 without clipping.
    #[default]
    AbsGradient,
    /// Integrate the raw gradient, then clamp at zero elementwise.
    ClampNonnegative,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("stepsize tau must be positive and finite, got {0}")]
    BadTau(f64),
    #[error("stop tolerance must be positive, got {0}")]
    BadStopTol(f64),
    #[error("alpha must lie in (0,1), got {0}")]
    BadAlpha(f64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("lambda0 entry {index} is negative ({value})")]
    NegativeLambda { index: usize, value: f64 },
    #[error("lambda0 has dimension {found}, problem has {expected}")]
    LambdaDim { expected: usize, found: usize },
    #[error("no protocol default alpha for m = {m}; set it explicitly")]
    UnknownAlpha { m: usize },
}

/// Non-fatal configuration findings surfaced to the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConfigWarning {
    /// The unbiased-equilibrium guarantee needs alpha > |k_i|.
    EquilibriumHypothesisViolated { alpha: f64, ki: f64 },
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::EquilibriumHypothesisViolated { alpha, ki } => write!(
                f,
                "alpha = {alpha} does not exceed |k_i| = {}; the unbiased-equilibrium \
                 guarantee does not apply",
                ki.abs()
            ),
        }
    }
}

/// Per-algorithm hyperparameters. `lambda0` is the fixed weight vector for
/// ISTA/FISTA, the base weight of the log-penalty reweighting for the
/// adaptive variants, and the initial threshold vector for the integral
/// controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub tau: f64,
    pub lambda0: DenseVector,
    pub ki: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub lambda_mode: LambdaMode,
    /// Threshold used for the support columns of the recorded trace.
    pub support_threshold: f64,
}

impl SolverConfig {
    /// Benchmark-protocol defaults for `algorithm` on the given instance:
    /// τ = ‖A‖₂⁻², stop 1e-10, cap 5×10⁴, k_i = 10⁻³, ε = 10⁻², and α keyed
    /// to m (0.05 for m = 210, 0.02 for m = 150; other m must set α via
    /// [`SolverConfig::with_alpha`] — only the integral controller needs it).
    pub fn protocol_defaults(
        algorithm: Algorithm,
        p: &ProblemInstance,
    ) -> Result<Self, ConfigError> {
        let alpha = default_alpha_for_m(p.num_measurements());
        if algorithm == Algorithm::IIsta && alpha.is_none() {
            return Err(ConfigError::UnknownAlpha { m: p.num_measurements() });
        }
        let n = p.dim();
        let lambda0 = match algorithm {
            Algorithm::Grad => DenseVector::zeros(n),
            Algorithm::Ista | Algorithm::Fista => {
                DenseVector::from_raw(vec![LAMBDA_L1; n])
            }
            Algorithm::AdIsta | Algorithm::AdFista => {
                DenseVector::from_raw(vec![LAMBDA_LOG; n])
            }
            Algorithm::IIsta => {
                let g0 = p.gradient(&DenseVector::zeros(n));
                DenseVector::from_raw(vec![INTEGRAL_LAMBDA0_SCALE * g0.linf(); n])
            }
        };
        let support_threshold = match algorithm {
            Algorithm::Grad => SUPPORT_THRESHOLD_GRAD,
            _ => SUPPORT_THRESHOLD_PROX,
        };
        Ok(Self {
            algorithm,
            tau: p.default_tau(),
            lambda0,
            ki: DEFAULT_KI,
            alpha: alpha.unwrap_or(0.05),
            epsilon: DEFAULT_EPSILON,
            stop_tol: STOP_TOL,
            max_iters: MAX_ITERS,
            lambda_mode: LambdaMode::default(),
            support_threshold,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Checks hard invariants; returns the non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ConfigError::BadTau(self.tau));
        }
        if self.stop_tol <= 0.0 || self.stop_tol.is_nan() {
            return Err(ConfigError::BadStopTol(self.stop_tol));
        }
        for (i, &l) in self.lambda0.iter().enumerate() {
            if l < 0.0 {
                return Err(ConfigError::NegativeLambda { index: i, value: l });
            }
        }
        if self.algorithm == Algorithm::IIsta && !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::BadAlpha(self.alpha));
        }
        if matches!(self.algorithm, Algorithm::AdIsta | Algorithm::AdFista)
            && (self.epsilon <= 0.0 || self.epsilon.is_nan())
        {
            return Err(ConfigError::BadEpsilon(self.epsilon));
        }
        let mut warnings = Vec::new();
        if self.algorithm == Algorithm::IIsta && self.alpha <= self.ki.abs() {
            warnings.push(ConfigWarning::EquilibriumHypothesisViolated {
                alpha: self.alpha,
                ki: self.ki,
            });
        }
        Ok(warnings)
    }
}

/// α keyed to the benchmark geometries.
pub fn default_alpha_for_m(m: usize) -> Option<f64> {
    match m {
        210 => Some(0.05),
        150 => Some(0.02),
        _ => None,
    }
}

/// Full solver state after k iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub k: usize,
    /// Current estimate x(k).
    pub x: DenseVector,
    /// Current weights λ(k); constant for ISTA/FISTA, reweighted each step
    /// for the adaptive variants, integrated for the integral controller.
    pub lambda: DenseVector,
    /// FISTA extrapolation point v(k); equals x elsewhere.
    pub momentum_x: DenseVector,
    /// FISTA scalar t(k).
    pub momentum_t: f64,
    /// ‖x(k) − x(k−1)‖₂; infinite before the first step.
    pub last_step_norm: f64,
}

impl IterateState {
    pub fn init(x0: DenseVector, lambda_init: DenseVector) -> Self {
        Self {
            k: 0,
            momentum_x: x0.clone(),
            x: x0,
            lambda: lambda_init,
            momentum_t: 1.0,
            last_step_norm: f64::INFINITY,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{algorithm} diverged at iteration {iteration}: {reason}")]
    Diverged { algorithm: Algorithm, iteration: usize, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error("state dimension {found} does not match problem dimension {expected}")]
    Dimension { expected: usize, found: usize },
}

fn step_norm(new_x: &[f64], old_x: &[f64]) -> f64 {
    new_x
        .iter()
        .zip(old_x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Gradient step `z = x - tau * g` followed by soft thresholding with
/// per-coordinate weights `tau * lambda`.
fn prox_gradient_update(x: &[f64], grad: &[f64], tau: f64, lambda: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .zip(lambda)
        .map(|((xi, gi), li)| soft_threshold_scalar(xi - tau * gi, tau * li))
        .collect()
}

/// λᵢ = λ₀ᵢ · ε / (ε + |vᵢ|): the prox-linearized reweighting induced by
/// the penalty λ₀ log(1 + |x|/ε). Inactive coordinates keep the full
/// weight; large coordinates are asymptotically unweighted.
fn adaptive_weights(lambda0: &DenseVector, at: &[f64], epsilon: f64) -> DenseVector {
    DenseVector::from_raw(
        lambda0
            .iter()
            .zip(at)
            .map(|(l0, v)| l0 * epsilon / (epsilon + v.abs()))
            .collect(),
    )
}

fn next_momentum_t(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

pub(crate) fn step_grad_with(s: &IterateState, c: &SolverConfig, grad: &DenseVector) -> IterateState {
    let x: Vec<f64> = s
        .x
        .iter()
        .zip(grad.iter())
        .map(|(xi, gi)| xi - c.tau * gi)
        .collect();
    let norm = step_norm(&x, s.x.as_slice());
    let x = DenseVector::from_raw(x);
    IterateState {
        k: s.k + 1,
        momentum_x: x.clone(),
        x,
        lambda: s.lambda.clone(),
        momentum_t: s.momentum_t,
        last_step_norm: norm,
    }
}

pub(crate) fn step_ista_with(s: &IterateState, c: &SolverConfig, grad: &DenseVector) -> IterateState {
    let x = prox_gradient_update(s.x.as_slice(), grad.as_slice(), c.tau, c.lambda0.as_slice());
    let norm = step_norm(&x, s.x.as_slice());
    let x = DenseVector::from_raw(x);
    IterateState {
        k: s.k + 1,
        momentum_x: x.clone(),
        x,
        lambda: c.lambda0.clone(),
        momentum_t: s.momentum_t,
        last_step_norm: norm,
    }
}

pub(crate) fn step_ad_ista_with(
    s: &IterateState,
    c: &SolverConfig,
    grad: &DenseVector,
) -> IterateState {
    let lambda = adaptive_weights(&c.lambda0, s.x.as_slice(), c.epsilon);
    let x = prox_gradient_update(s.x.as_slice(), grad.as_slice(), c.tau, lambda.as_slice());
    let norm = step_norm(&x, s.x.as_slice());
    let x = DenseVector::from_raw(x);
    IterateState {
        k: s.k + 1,
        momentum_x: x.clone(),
        x,
        lambda,
        momentum_t: s.momentum_t,
        last_step_norm: norm,
    }
}

/// Shared FISTA recursion; `lambda` is the weight vector used at the
/// extrapolated point (fixed for FISTA, reweighted for the adaptive
/// variant). `grad_v` is the gradient at `s.momentum_x`.
fn step_momentum(
    s: &IterateState,
    c: &SolverConfig,
    grad_v: &DenseVector,
    lambda: DenseVector,
) -> IterateState {
    let x_new = prox_gradient_update(
        s.momentum_x.as_slice(),
        grad_v.as_slice(),
        c.tau,
        lambda.as_slice(),
    );
    let norm = step_norm(&x_new, s.x.as_slice());
    let t_new = next_momentum_t(s.momentum_t);
    let beta = (s.momentum_t - 1.0) / t_new;
    let v_new: Vec<f64> = x_new
        .iter()
        .zip(s.x.iter())
        .map(|(xn, xo)| xn + beta * (xn - xo))
        .collect();
    IterateState {
        k: s.k + 1,
        x: DenseVector::from_raw(x_new),
        lambda,
        momentum_x: DenseVector::from_raw(v_new),
        momentum_t: t_new,
        last_step_norm: norm,
    }
}

pub(crate) fn step_fista_with(
    s: &IterateState,
    c: &SolverConfig,
    grad_v: &DenseVector,
) -> IterateState {
    step_momentum(s, c, grad_v, c.lambda0.clone())
}

pub(crate) fn step_ad_fista_with(
    s: &IterateState,
    c: &SolverConfig,
    grad_v: &DenseVector,
) -> IterateState {
    let lambda = adaptive_weights(&c.lambda0, s.momentum_x.as_slice(), c.epsilon);
    step_momentum(s, c, grad_v, lambda)
}

pub(crate) fn step_i_ista_with(
    s: &IterateState,
    c: &SolverConfig,
    grad: &DenseVector,
) -> IterateState {
    let x = prox_gradient_update(s.x.as_slice(), grad.as_slice(), c.tau, s.lambda.as_slice());
    let norm = step_norm(&x, s.x.as_slice());
    let x = DenseVector::from_raw(x);
    let leak = 1.0 - c.alpha;
    let lambda: Vec<f64> = match c.lambda_mode {
        LambdaMode::AbsGradient => s
            .lambda
            .iter()
            .zip(grad.iter())
            .map(|(li, gi)| leak * li + c.ki * gi.abs())
            .collect(),
        LambdaMode::ClampNonnegative => s
            .lambda
            .iter()
            .zip(grad.iter())
            .map(|(li, gi)| (leak * li + c.ki * gi).max(0.0))
            .collect(),
    };
    IterateState {
        k: s.k + 1,
        momentum_x: x.clone(),
        x,
        lambda: DenseVector::from_raw(lambda),
        momentum_t: s.momentum_t,
        last_step_norm: norm,
    }
}

fn check_state_dim<O: Objective>(obj: &O, s: &IterateState) -> Result<(), SolverError> {
    if s.x.dim() != obj.dim() {
        return Err(SolverError::Dimension { expected: obj.dim(), found: s.x.dim() });
    }
    Ok(())
}

/// One gradient-descent step: x ← x − τ∇f(x); weights unchanged.
pub fn step_grad<O: Objective>(obj: &O, s: &IterateState, c: &SolverConfig) -> Result<IterateState, SolverError> {
    check_state_dim(obj, s)?;
    Ok(step_grad_with(s, c, &obj.gradient(&s.x)))
}

/// One ISTA step with the fixed weights of the config.
pub fn step_ista<O: Objective>(obj: &O, s: &IterateState, c: &SolverConfig) -> Result<IterateState, SolverError> {
    check_state_dim(obj, s)?;
    Ok(step_ista_with(s, c, &obj.gradient(&s.x)))
}

/// One FISTA step: prox-gradient at the extrapolated point, then the
/// momentum recursion t(k+1) = (1 + √(1 + 4t(k)²))/2.
pub fn step_fista<O: Objective>(obj: &O, s: &IterateState, c: &SolverConfig) -> Result<IterateState, SolverError> {
    check_state_dim(obj, s)?;
    Ok(step_fista_with(s, c, &obj.gradient(&s.momentum_x)))
}

/// One adaptive-threshold ISTA step: weights reweighted at x(k) from the
/// log penalty, then a prox-gradient step.
pub fn step_ad_ista<O: Objective>(obj: &O, s: &IterateState, c: &SolverConfig) -> Result<IterateState, SolverError> {
    check_state_dim(obj, s)?;
    Ok(step_ad_ista_with(s, c, &obj.gradient(&s.x)))
}

/// One adaptive-threshold FISTA step; weights are reweighted at the
/// extrapolated point, where the gradient is evaluated.
pub fn step_ad_fista<O: Objective>(obj: &O, s: &IterateState, c: &SolverConfig) -> Result<IterateState, SolverError> {
    check_state_dim(obj, s)?;
    Ok(step_ad_fista_with(s, c, &obj.gradient(&s.momentum_x)))
}

/// One integral-controlled ISTA step: a prox-gradient step with the current
/// thresholds, then the leaky integral update of λ driven by the gradient
/// at x(k). Both lambda modes keep λ(k+1) ≥ 0.
pub fn step_i_ista<O: Objective>(obj: &O, s: &IterateState, c: &SolverConfig) -> Result<IterateState, SolverError> {
    check_state_dim(obj, s)?;
    Ok(step_i_ista_with(s, c, &obj.gradient(&s.x)))
}

fn guard(c: &SolverConfig, s: &IterateState) -> Result<(), SolverError> {
    let bad = !s.x.is_finite() || !s.lambda.is_finite();
    if bad || s.x.l2() > DIVERGENCE_NORM {
        let reason = if bad {
            "non-finite iterate".to_string()
        } else {
            format!("iterate norm exceeded {DIVERGENCE_NORM:e}")
        };
        return Err(SolverError::Diverged {
            algorithm: c.algorithm,
            iteration: s.k,
            reason,
        });
    }
    Ok(())
}

/// Result of a full solver run, with the per-iteration metric trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_x: DenseVector,
    pub final_lambda: DenseVector,
    pub iterations: usize,
    pub converged: bool,
    pub trace: IterationTrace,
}

/// Runs the configured algorithm from `x0` with initial weights
/// `lambda_init` until ‖x(k+1) − x(k)‖₂ < stop_tol or the iteration cap.
/// The observer sees every fresh state, in iteration order, on the calling
/// thread. NaN/Inf or an exploding iterate aborts with a divergence error
/// naming the algorithm and iteration.
pub fn run(
    p: &ProblemInstance,
    c: &SolverConfig,
    x0: &DenseVector,
    lambda_init: &DenseVector,
    mut observer: impl FnMut(&IterateState),
) -> Result<RunResult, SolverError> {
    c.validate()?;
    if x0.dim() != p.dim() {
        return Err(SolverError::Dimension { expected: p.dim(), found: x0.dim() });
    }
    if lambda_init.dim() != p.dim() {
        return Err(SolverError::Dimension { expected: p.dim(), found: lambda_init.dim() });
    }
    if c.lambda0.dim() != p.dim() {
        return Err(ConfigError::LambdaDim { expected: p.dim(), found: c.lambda0.dim() }.into());
    }

    let mut state = IterateState::init(x0.clone(), lambda_init.clone());
    let mut trace = IterationTrace::new();
    let momentum = c.algorithm.uses_momentum();
    let mut converged = false;

    // For the non-momentum algorithms the gradient at x(k) is evaluated at
    // the top of iteration k+1, which yields the residual norm at x(k) for
    // free; recording therefore lags one iteration and the final state is
    // recorded after the loop. The momentum algorithms evaluate gradients
    // at the extrapolated point, so their rows pay a dedicated residual.
    while state.k < c.max_iters {
        let next = if momentum {
            let (grad_v, _) = p.gradient_with_residual_norm(state.momentum_x.as_slice());
            match c.algorithm {
                Algorithm::Fista => step_fista_with(&state, c, &grad_v),
                Algorithm::AdFista => step_ad_fista_with(&state, c, &grad_v),
                _ => unreachable!(),
            }
        } else {
            let (grad, res_norm) = p.gradient_with_residual_norm(state.x.as_slice());
            if state.k > 0 {
                trace.rows.push(metrics::row_from_iterate(
                    p,
                    state.k,
                    &state.x,
                    &state.lambda,
                    state.last_step_norm,
                    res_norm,
                    c.support_threshold,
                ));
                observer(&state);
            }
            match c.algorithm {
                Algorithm::Grad => step_grad_with(&state, c, &grad),
                Algorithm::Ista => step_ista_with(&state, c, &grad),
                Algorithm::AdIsta => step_ad_ista_with(&state, c, &grad),
                Algorithm::IIsta => step_i_ista_with(&state, c, &grad),
                _ => unreachable!(),
            }
        };
        guard(c, &next)?;
        state = next;
        if momentum {
            let res_norm = p
                .residual(&state.x)
                .expect("dimensions preserved by stepping")
                .l2();
            trace.rows.push(metrics::row_from_iterate(
                p,
                state.k,
                &state.x,
                &state.lambda,
                state.last_step_norm,
                res_norm,
                c.support_threshold,
            ));
            observer(&state);
        }
        if state.last_step_norm < c.stop_tol {
            converged = true;
            break;
        }
    }

    if !momentum && state.k > 0 {
        let res_norm = p
            .residual(&state.x)
            .expect("dimensions preserved by stepping")
            .l2();
        trace.rows.push(metrics::row_from_iterate(
            p,
            state.k,
            &state.x,
            &state.lambda,
            state.last_step_norm,
            res_norm,
            c.support_threshold,
        ));
        observer(&state);
    }

    Ok(RunResult {
        final_x: state.x,
        final_lambda: state.lambda,
        iterations: state.k,
        converged,
        trace,
    })
}

/// Convenience wrapper: starts from x(0) = 0 with λ(0) = config.lambda0.
pub fn solve(p: &ProblemInstance, c: &SolverConfig) -> Result<RunResult, SolverError> {
    run(p, c, &DenseVector::zeros(p.dim()), &c.lambda0.clone(), |_| {})
}
