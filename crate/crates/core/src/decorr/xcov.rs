use crate::error::{Error, Result};
use crate::linalg::{center_columns, gemm, Matrix, Trans};

/// Cross-covariance penalty between two code blocks, `½ Σ_ij Cov(y_i, z_j)²`
/// with `Cov = ȲᵀZ̄/(m−1)` on batch-centred codes. Within-block
/// correlations are not penalised.
///
/// Returns `(loss, ∂L/∂Y, ∂L/∂Z)`. Because the partner block is centred the
/// centring step contributes nothing extra to either gradient.
pub fn xcov_loss_grad(y: &Matrix, z: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    if y.rows() != z.rows() {
        return Err(Error::shape(format!(
            "xcov blocks have {} and {} rows",
            y.rows(),
            z.rows()
        )));
    }
    let m = y.rows();
    if m < 2 {
        return Err(Error::DegenerateBatch(format!(
            "xcov needs at least 2 rows, got {m}"
        )));
    }
    let scale = 1.0 / (m as f64 - 1.0);
    let (yc, _) = center_columns(y);
    let (zc, _) = center_columns(z);
    let mut c = Matrix::zeros(y.cols(), z.cols());
    gemm(scale, &yc, Trans::Yes, &zc, Trans::No, 0.0, &mut c)?;
    let loss = 0.5 * c.data().iter().map(|v| v * v).sum::<f64>();
    let mut gy = Matrix::zeros(m, y.cols());
    gemm(scale, &zc, Trans::No, &c, Trans::Yes, 0.0, &mut gy)?;
    let mut gz = Matrix::zeros(m, z.cols());
    gemm(scale, &yc, Trans::No, &c, Trans::No, 0.0, &mut gz)?;
    Ok((loss, gy, gz))
}
