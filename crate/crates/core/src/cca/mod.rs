//! Soft CCA: two networks pulled together by an L2 distance while each
//! embedding is softly decorrelated, plus the closed-form linear CCA
//! oracle, exact whitening, and the evaluation metrics.

pub(crate) mod classifier;
mod eval;
mod linear;
mod soft;

pub use classifier::{ClassifierConfig, SoftmaxClassifier};
pub use eval::{correlation_strength, cross_view_eval, CorrelationReport, CrossViewReport};
pub use linear::{linear_cca_fit, LinearCcaModel, DEFAULT_RIDGE};
pub use soft::{EpochMetrics, SoftCcaConfig, SoftCcaModel, SoftCcaTrainer, StepOutput};

use crate::decorr::minibatch_cov;
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_sym, matmul, Matrix};

/// `‖Z₁ − Z₂‖²_F / (2m)` with gradients `±(Z₁ − Z₂)/m`.
pub fn l2_dist_loss(z1: &Matrix, z2: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    if z1.shape() != z2.shape() {
        return Err(Error::shape(format!(
            "l2 distance between {}x{} and {}x{}",
            z1.rows(),
            z1.cols(),
            z2.rows(),
            z2.cols()
        )));
    }
    let m = z1.rows().max(1) as f64;
    let diff = z1.sub(z2)?;
    let loss = diff.data().iter().map(|v| v * v).sum::<f64>() / (2.0 * m);
    let g1 = diff.scaled(1.0 / m);
    let g2 = g1.scaled(-1.0);
    Ok((loss, g1, g2))
}

/// Hard decorrelation of a mini-batch: `Z · (ZᵀZ/(m−1) + ridge·I)^(−1/2)`.
pub fn exact_decorrelation_step(z: &Matrix, ridge: f64) -> Result<Matrix> {
    let c = minibatch_cov(z)?;
    let w = inv_sqrt_sym(&c, ridge)?;
    matmul(z, &w)
}

#[cfg(test)]
mod tests;
