use super::{minibatch_cov, off_diagonal_half_sq, off_diagonal_l1, DecorrVariant, SdlState};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix, Trans};

fn zero_diagonal(c: &Matrix) -> Matrix {
    let mut off = c.clone();
    for i in 0..off.rows() {
        off.set(i, i, 0.0);
    }
    off
}

/// `scale · Z · M`.
fn z_times(z: &Matrix, m: &Matrix, scale: f64) -> Result<Matrix> {
    let mut g = Matrix::zeros(z.rows(), m.cols());
    gemm(scale, z, Trans::No, m, Trans::No, 0.0, &mut g)?;
    Ok(g)
}

/// DeCov-family losses with exact gradients.
///
/// * `DeCov`: `½ Σ_{i≠j} C_ij²`, gradient `2/(m−1) · Z·C_off`.
/// * `DeCovL1`: `Σ_{i≠j} |C_ij|`, gradient `2/(m−1) · Z·S`.
/// * `DeCovGc`: `½ Σ_{i≠j} φ_ij²` on the accumulated approximation, which
///   advances `state`; gradient `2/(c^t (m−1)) · Z·Φ_off`.
pub fn decov_loss_grad(
    z: &Matrix,
    variant: DecorrVariant,
    state: Option<&mut SdlState>,
) -> Result<(f64, Matrix)> {
    let m = z.rows();
    match variant {
        DecorrVariant::DeCov => {
            let c = minibatch_cov(z)?;
            let g = z_times(z, &zero_diagonal(&c), 2.0 / (m as f64 - 1.0))?;
            Ok((off_diagonal_half_sq(&c), g))
        }
        DecorrVariant::DeCovL1 => {
            let c = minibatch_cov(z)?;
            let s = super::sdl::off_diagonal_signs(&c);
            let g = z_times(z, &s, 2.0 / (m as f64 - 1.0))?;
            Ok((off_diagonal_l1(&c), g))
        }
        DecorrVariant::DeCovGc => {
            let state =
                state.ok_or_else(|| Error::config("decov_gc needs an accumulator state"))?;
            let upd = state.update(z)?;
            let g = z_times(
                z,
                &zero_diagonal(&upd.c_appx),
                2.0 / (upd.norm_factor * (m as f64 - 1.0)),
            )?;
            Ok((off_diagonal_half_sq(&upd.c_appx), g))
        }
        other => Err(Error::config(format!("{other} is not a DeCov variant"))),
    }
}

/// The DeCovGC loss for `z` against a frozen accumulator.
pub fn decov_gc_frozen_loss(state: &SdlState, z: &Matrix) -> Result<f64> {
    Ok(off_diagonal_half_sq(&state.preview(z)?.c_appx))
}
