//! Least-squares objective, its gradient, the weighted-ℓ1 composite
//! objective, and the convexity constants of the quadratic specialization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, matvec_into, matvec_transpose_into, DenseMatrix, DenseVector, LinalgError,
    SPECTRAL_MAX_ITERS, SPECTRAL_TOL,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("measurement dimension {y_dim} does not match matrix rows {rows}")]
    MeasurementDim { rows: usize, y_dim: usize },
    #[error("ground truth dimension {truth_dim} does not match matrix columns {cols}")]
    TruthDim { cols: usize, truth_dim: usize },
    #[error("argument dimension {found} does not match problem dimension {expected}")]
    ArgumentDim { expected: usize, found: usize },
    #[error("ground truth does not fit the measurements: ||A x_true - y|| = {misfit}")]
    InconsistentTruth { misfit: f64 },
    #[error("regularization weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
}

/// A differentiable objective exposed through value and gradient callbacks,
/// so the solver loops do not assume quadratic structure.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DenseVector) -> f64;
    fn gradient(&self, x: &DenseVector) -> DenseVector;
}

/// A sparse-recovery least-squares instance: sensing matrix, measurements,
/// optional ground truth and the derived constants every solver needs.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    a: DenseMatrix,
    y: DenseVector,
    x_true: Option<DenseVector>,
    spec_norm_a: f64,
    mu: f64,
    beta: f64,
    seed: Option<u64>,
}

impl ProblemInstance {
    /// Builds an instance and computes its spectral constants. When a ground
    /// truth is supplied the measurements must fit it exactly (noiseless
    /// protocol): ‖A·x̃ − y‖₂ ≤ 1e-12·‖y‖₂.
    pub fn new(
        a: DenseMatrix,
        y: DenseVector,
        x_true: Option<DenseVector>,
        seed: Option<u64>,
    ) -> Result<Self, ProblemError> {
        if a.rows() != y.dim() {
            return Err(ProblemError::MeasurementDim { rows: a.rows(), y_dim: y.dim() });
        }
        if let Some(t) = &x_true {
            if t.dim() != a.cols() {
                return Err(ProblemError::TruthDim { cols: a.cols(), truth_dim: t.dim() });
            }
            let fit = linalg::matvec(&a, t)?;
            let misfit = fit.distance(&y);
            if misfit > 1e-12 * y.l2() {
                return Err(ProblemError::InconsistentTruth { misfit });
            }
        }
        let (mu, beta) = linalg::extreme_squared_singular_values(&a)?;
        Ok(Self { a, y, x_true, spec_norm_a: beta.sqrt(), mu, beta, seed })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn measurements(&self) -> &DenseVector {
        &self.y
    }

    pub fn x_true(&self) -> Option<&DenseVector> {
        self.x_true.as_ref()
    }

    pub fn num_measurements(&self) -> usize {
        self.a.rows()
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// Cached ‖A‖₂.
    pub fn spec_norm(&self) -> f64 {
        self.spec_norm_a
    }

    /// Strong-convexity constant σ_min(A)²; zero when m < n.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Smoothness constant σ_max(A)².
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The benchmark stepsize τ = ‖A‖₂⁻².
    pub fn default_tau(&self) -> f64 {
        1.0 / self.beta
    }

    fn check_dim(&self, x: &DenseVector) -> Result<(), ProblemError> {
        if x.dim() != self.dim() {
            return Err(ProblemError::ArgumentDim { expected: self.dim(), found: x.dim() });
        }
        Ok(())
    }

    /// Residual vector A·x − y.
    pub fn residual(&self, x: &DenseVector) -> Result<DenseVector, ProblemError> {
        self.check_dim(x)?;
        let mut r = vec![0.0; self.a.rows()];
        matvec_into(&self.a, x.as_slice(), &mut r);
        for (ri, yi) in r.iter_mut().zip(self.y.iter()) {
            *ri -= yi;
        }
        Ok(DenseVector::from_raw(r))
    }

    /// Gradient together with the residua l2 norm, sharing the forward
    /// product; the solver loop records the residual norm in the trace.
    pub(crate) fn gradient_with_residual_norm(&self, x: &[f64]) -> (DenseVector, f64) {
        let mut r = vec![0.0; self.a.rows()];
        matvec_into(&self.a, x, &mut r);
        for (ri, yi) in r.iter_mut().zip(self.y.iter()) {
            *ri -= yi;
        }
        let res_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut g = vec![0.0; self.a.cols()];
        matvec_transpose_into(&self.a, &r, &mut g);
        (DenseVector::from_raw(g), res_norm)
    }
}

impl Objective for ProblemInstance {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &DenseVector) -> f64 {
        objective(self, x).expect("dimension checked by caller")
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        gradient(self, x).expect("dimension checked by caller")
    }
}

/// f(x) = ½‖Ax − y‖₂².
pub fn objective(p: &ProblemInstance, x: &DenseVector) -> Result<f64, ProblemError> {
    let r = p.residual(x)?;
    Ok(0.5 * r.iter().map(|v| v * v).sum::<f64>())
}

/// ∇f(x) = Aᵀ(Ax − y).
pub fn gradient(p: &ProblemInstance, x: &DenseVector) -> Result<DenseVector, ProblemError> {
    let r = p.residual(x)?;
    Ok(linalg::matvec_transpose(&p.a, &r)?)
}

/// f(x) + Σᵢ λᵢ|xᵢ| with λᵢ ≥ 0.
pub fn composite_objective(
    p: &ProblemInstance,
    x: &DenseVector,
    lambda: &DenseVector,
) -> Result<f64, ProblemError> {
    if lambda.dim() != x.dim() {
        return Err(ProblemError::ArgumentDim { expected: x.dim(), found: lambda.dim() });
    }
    for (i, &l) in lambda.iter().enumerate() {
        if l < 0.0 {
            return Err(ProblemError::NegativeWeight { index: i, value: l });
        }
    }
    let f = objective(p, x)?;
    let penalty: f64 = x.iter().zip(lambda.iter()).map(|(xi, li)| li * xi.abs()).sum();
    Ok(f + penalty)
}

/// (μ, β) for the quadratic objective: extreme squared singular values of A.
pub fn convexity_constants(a: &DenseMatrix) -> Result<(f64, f64), ProblemError> {
    Ok(linalg::extreme_squared_singular_values(a)?)
}

/// Standalone spectral norm with the instance-construction defaults.
pub fn instance_spectral_norm(a: &DenseMatrix) -> Result<f64, ProblemError> {
    Ok(linalg::spectral_norm(a, SPECTRAL_TOL, SPECTRAL_MAX_ITERS)?)
}

/// On-disk instance schema: `{m, n, A (row-major), y, x_true?, seed?}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_true: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InstanceFile {
    pub fn from_instance(p: &ProblemInstance) -> Self {
        Self {
            m: p.num_measurements(),
            n: p.dim(),
            a: p.matrix().entries().to_vec(),
            y: p.measurements().as_slice().to_vec(),
            x_true: p.x_true().map(|t| t.as_slice().to_vec()),
            seed: p.seed(),
        }
    }

    /// Rebuilds the instance, recomputing the derived constants
    /// deterministically.
    pub fn into_instance(self) -> Result<ProblemInstance, ProblemError> {
        let a = DenseMatrix::new(self.m, self.n, self.a)?;
        let y = DenseVector::new(self.y)?;
        let x_true = self.x_true.map(DenseVector::new).transpose()?;
        ProblemInstance::new(a, y, x_true, self.seed)
    }
}
