//! Decorrelation losses on a mini-batch of activations `Z` (m×k).
//!
//! All covariances here are `ZᵀZ/(m−1)`; callers feed batch-normalised (or
//! explicitly centred) activations. Every gradient is exact for the loss as
//! written, with the accumulated history of [`SdlState`] treated as a
//! constant.

mod decov;
mod sdl;
mod xcov;

pub use decov::{decov_gc_frozen_loss, decov_loss_grad};
pub use sdl::{SdlState, SdlUpdate, SignMatrix};
pub use xcov::xcov_loss_grad;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{center_columns, gemm, Matrix, Trans};

/// Which decorrelation penalty a trainer applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecorrVariant {
    /// L1 on the off-diagonal of the decayed accumulated covariance.
    Sdl,
    /// Half squared off-diagonal of the mini-batch covariance.
    DeCov,
    /// L1 off-diagonal of the mini-batch covariance.
    DeCovL1,
    /// DeCov on the accumulated covariance.
    DeCovGc,
    /// Half squared cross-covariance between two code blocks.
    XCov,
    None,
}

impl DecorrVariant {
    pub const ALL: [DecorrVariant; 6] = [
        DecorrVariant::Sdl,
        DecorrVariant::DeCov,
        DecorrVariant::DeCovL1,
        DecorrVariant::DeCovGc,
        DecorrVariant::XCov,
        DecorrVariant::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecorrVariant::Sdl => "sdl",
            DecorrVariant::DeCov => "decov",
            DecorrVariant::DeCovL1 => "decov_l1",
            DecorrVariant::DeCovGc => "decov_gc",
            DecorrVariant::XCov => "xcov",
            DecorrVariant::None => "none",
        }
    }

    /// Variants that carry an accumulated covariance.
    pub fn uses_accumulator(self) -> bool {
        matches!(self, DecorrVariant::Sdl | DecorrVariant::DeCovGc)
    }
}

impl fmt::Display for DecorrVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecorrVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecorrVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown decorrelation variant {s:?} (expected sdl, decov, decov_l1, decov_gc, xcov or none)"
                ))
            })
    }
}

/// `ZᵀZ/(m−1)`, exactly symmetric. `z` must already be centred.
pub fn minibatch_cov(z: &Matrix) -> Result<Matrix> {
    let m = z.rows();
    if m < 2 {
        return Err(Error::DegenerateBatch(format!(
            "mini-batch covariance needs at least 2 rows, got {m}"
        )));
    }
    let k = z.cols();
    let mut c = Matrix::zeros(k, k);
    gemm(
        1.0 / (m as f64 - 1.0),
        z,
        Trans::Yes,
        z,
        Trans::No,
        0.0,
        &mut c,
    )?;
    symmetrize_in_place(&mut c);
    Ok(c)
}

/// Centres the columns of `z` and returns its mini-batch covariance.
pub fn centered_minibatch_cov(z: &Matrix) -> Result<Matrix> {
    let (zc, _) = center_columns(z);
    minibatch_cov(&zc)
}

pub(crate) fn symmetrize_in_place(c: &mut Matrix) {
    const TILE: usize = 64;
    let k = c.rows();
    let d = c.data_mut();
    for bi in (0..k).step_by(TILE) {
        for bj in (bi..k).step_by(TILE) {
            for i in bi..(bi + TILE).min(k) {
                for j in bj.max(i + 1)..(bj + TILE).min(k) {
                    let v = 0.5 * (d[i * k + j] + d[j * k + i]);
                    d[i * k + j] = v;
                    d[j * k + i] = v;
                }
            }
        }
    }
}

/// `Σ_{i≠j} |c_ij|`.
pub fn off_diagonal_l1(c: &Matrix) -> f64 {
    let k = c.rows();
    let mut s = 0.0;
    for i in 0..k {
        for (j, v) in c.row(i).iter().enumerate() {
            if i != j {
                s += v.abs();
            }
        }
    }
    s
}

/// `½ Σ_{i≠j} c_ij²`.
pub fn off_diagonal_half_sq(c: &Matrix) -> f64 {
    let k = c.rows();
    let mut s = 0.0;
    for i in 0..k {
        for (j, v) in c.row(i).iter().enumerate() {
            if i != j {
                s += v * v;
            }
        }
    }
    0.5 * s
}

/// Mean absolute off-diagonal entry.
pub fn mean_abs_off_diagonal(c: &Matrix) -> f64 {
    let k = c.rows();
    if k < 2 {
        return 0.0;
    }
    off_diagonal_l1(c) / (k * (k - 1)) as f64
}

/// A decorrelation variant bundled with the accumulator it may need; this
/// is what the trainers hold.
#[derive(Clone, Debug, PartialEq)]
pub struct Decorrelator {
    pub variant: DecorrVariant,
    pub state: SdlState,
    /// Leading columns that form the first block for XCov.
    pub split: usize,
}

impl Decorrelator {
    pub fn new(variant: DecorrVariant, k: usize, alpha: f64, split: usize) -> Result<Self> {
        if variant == DecorrVariant::XCov && (split == 0 || split >= k) {
            return Err(Error::config(format!(
                "xcov needs a split strictly inside the {k} code dimensions, got {split}"
            )));
        }
        Ok(Decorrelator {
            variant,
            state: SdlState::new(k, alpha)?,
            split,
        })
    }

    /// Loss and gradient for this batch, advancing the accumulator where the
    /// variant has one.
    pub fn loss_grad(&mut self, z: &Matrix) -> Result<(f64, Matrix)> {
        match self.variant {
            DecorrVariant::Sdl => self.state.loss_grad(z),
            DecorrVariant::DeCov | DecorrVariant::DeCovL1 => decov_loss_grad(z, self.variant, None),
            DecorrVariant::DeCovGc => decov_loss_grad(z, self.variant, Some(&mut self.state)),
            DecorrVariant::XCov => {
                let (y, c) = (
                    z.col_block(0, self.split),
                    z.col_block(self.split, z.cols()),
                );
                let (loss, gy, gc) = xcov_loss_grad(&y, &c)?;
                Ok((loss, Matrix::hcat(&gy, &gc)?))
            }
            DecorrVariant::None => Ok((0.0, Matrix::zeros(z.rows(), z.cols()))),
        }
    }

    /// The loss `loss_grad` would report for `z`, without touching state.
    pub fn frozen_loss(&self, z: &Matrix) -> Result<f64> {
        match self.variant {
            DecorrVariant::Sdl => Ok(self.state.preview(z)?.loss),
            DecorrVariant::DeCov | DecorrVariant::DeCovL1 => {
                Ok(decov_loss_grad(z, self.variant, None)?.0)
            }
            DecorrVariant::DeCovGc => decov_gc_frozen_loss(&self.state, z),
            DecorrVariant::XCov => {
                let (y, c) = (
                    z.col_block(0, self.split),
                    z.col_block(self.split, z.cols()),
                );
                Ok(xcov_loss_grad(&y, &c)?.0)
            }
            DecorrVariant::None => Ok(0.0),
        }
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }
}
