//! Weighted shrinkage-thresholding: the proximal map of a weighted ℓ1 term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseVector;

#[derive(Debug, Error)]
pub enum ProxError {
    #[error("dimension mismatch: input has {input}, thresholds have {thresholds}")]
    DimensionMismatch { input: usize, thresholds: usize },
    #[error("threshold entry {index} is negative ({value})")]
    NegativeThreshold { index: usize, value: f64 },
    #[error("threshold entry {index} is not finite")]
    NonFinite { index: usize },
}

/// Per-coordinate nonnegative thresholds, i.e. the pre-multiplied τλ of the
/// shrinkage operator. Taking the product rather than (τ, λ) separately
/// avoids re-scaling ambiguity for solvers whose λ changes every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseVector", into = "DenseVector")]
pub struct ThresholdVector(DenseVector);

impl ThresholdVector {
    pub fn new(weights: DenseVector) -> Result<Self, ProxError> {
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(ProxError::NonFinite { index: i });
            }
            if w < 0.0 {
                return Err(ProxError::NegativeThreshold { index: i, value: w });
            }
        }
        Ok(Self(weights))
    }

    /// Thresholds τ·λ from a stepsize and weight vector.
    pub fn scaled(tau: f64, lambda: &DenseVector) -> Result<Self, ProxError> {
        let scaled: Vec<f64> = lambda.iter().map(|l| tau * l).collect();
        Self::new(DenseVector::from_raw(scaled))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn weights(&self) -> &DenseVector {
        &self.0
    }
}

impl TryFrom<DenseVector> for ThresholdVector {
    type Error = ProxError;
    fn try_from(v: DenseVector) -> Result<Self, ProxError> {
        Self::new(v)
    }
}

impl From<ThresholdVector> for DenseVector {
    fn from(t: ThresholdVector) -> DenseVector {
        t.0
    }
}

/// Componentwise soft threshold: `z_i - sign(z_i) t_i` when `|z_i| > t_i`,
/// zero otherwise. The boundary `|z_i| == t_i` maps to zero, which keeps the
/// operator continuous and matches the closed-form minimizer of
/// `t|x| + (x - z)^2 / 2`.
pub fn soft_threshold(z: &DenseVector, t: &ThresholdVector) -> Result<DenseVector, ProxError> {
    if z.dim() != t.dim() {
        return Err(ProxError::DimensionMismatch { input: z.dim(), thresholds: t.dim() });
    }
    let mut out = Vec::with_capacity(z.dim());
    for (&zi, &ti) in z.iter().zip(t.weights().iter()) {
        out.push(soft_threshold_scalar(zi, ti));
    }
    Ok(DenseVector::from_raw(out))
}

#[inline]
pub(crate) fn soft_threshold_scalar(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}
