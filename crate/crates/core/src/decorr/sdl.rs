use super::{off_diagonal_l1, symmetrize_in_place};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix, Trans};

/// Decayed covariance accumulator behind the stochastic decorrelation loss.
///
/// After `t` updates `c_accu = Σ α^(t−s) C_mini^s` and
/// `norm_factor = Σ_{i<t} α^i`, so `c_accu / norm_factor` is a weighted
/// average of all mini-batch covariances seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct SdlState {
    pub c_accu: Matrix,
    pub norm_factor: f64,
    pub alpha: f64,
    pub step: u64,
}

/// Result of folding one mini-batch into an [`SdlState`].
#[derive(Clone, Debug, PartialEq)]
pub struct SdlUpdate {
    pub loss: f64,
    /// `c_accu / norm_factor` after the update.
    pub c_appx: Matrix,
    pub norm_factor: f64,
}

impl SdlState {
    pub fn new(k: usize, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::config(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(SdlState {
            c_accu: Matrix::zeros(k, k),
            norm_factor: 0.0,
            alpha,
            step: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.c_accu.rows()
    }

    pub fn reset(&mut self) {
        self.c_accu = Matrix::zeros(self.dim(), self.dim());
        self.norm_factor = 0.0;
        self.step = 0;
    }

    fn check_batch(&self, z: &Matrix) -> Result<()> {
        if z.cols() != self.dim() {
            return Err(Error::shape(format!(
                "SDL state is {0}x{0} but the batch has {1} columns",
                self.dim(),
                z.cols()
            )));
        }
        Ok(())
    }

    /// `C_accu^t = α·C_accu^{t−1} + C_mini^t` in place, returning `c^t = α·c^{t−1} + 1`.
    fn fold(&self, accu: &mut Matrix, z: &Matrix) -> Result<f64> {
        if z.cols() != accu.rows() {
            return Err(Error::shape(format!(
                "SDL state is {0}x{0} but the batch has {1} columns",
                accu.rows(),
                z.cols()
            )));
        }
        let m = z.rows();
        if m < 2 {
            return Err(Error::DegenerateBatch(format!(
                "mini-batch covariance needs at least 2 rows, got {m}"
            )));
        }
        gemm(
            1.0 / (m as f64 - 1.0),
            z,
            Trans::Yes,
            z,
            Trans::No,
            self.alpha,
            accu,
        )?;
        symmetrize_in_place(accu);
        Ok(self.alpha * self.norm_factor + 1.0)
    }

    /// What [`update`](Self::update) would return for `z`, leaving the state
    /// unchanged.
    pub fn preview(&self, z: &Matrix) -> Result<SdlUpdate> {
        let mut accu = self.c_accu.clone();
        let c = self.fold(&mut accu, z)?;
        Ok(SdlUpdate {
            loss: off_diagonal_l1(&accu) / c,
            c_appx: accu.scaled(1.0 / c),
            norm_factor: c,
        })
    }

    /// Folds the batch into the accumulator and returns the loss
    /// `Σ_{i≠j} |φ_ij|` over the new approximation `C_appx`.
    pub fn update(&mut self, z: &Matrix) -> Result<SdlUpdate> {
        self.advance_in_place(z)?;
        let c = self.norm_factor;
        Ok(SdlUpdate {
            loss: off_diagonal_l1(&self.c_accu) / c,
            c_appx: self.c_accu.scaled(1.0 / c),
            norm_factor: c,
        })
    }

    fn advance_in_place(&mut self, z: &Matrix) -> Result<()> {
        self.check_batch(z)?;
        let mut accu = std::mem::replace(&mut self.c_accu, Matrix::zeros(0, 0));
        let folded = self.fold(&mut accu, z);
        self.c_accu = accu;
        self.norm_factor = folded?;
        self.step += 1;
        Ok(())
    }

    /// [`update`](Self::update) followed by [`gradient`](Self::gradient)
    /// without materialising `C_appx`; this is the training path.
    pub fn loss_grad(&mut self, z: &Matrix) -> Result<(f64, Matrix)> {
        self.advance_in_place(z)?;
        let c = self.norm_factor;
        let loss = off_diagonal_l1(&self.c_accu) / c;
        // C_appx and C_accu differ by the positive factor c, so their signs agree.
        let s = off_diagonal_signs(&self.c_accu);
        let m = z.rows();
        let mut g = Matrix::zeros(m, self.dim());
        gemm(
            2.0 / (c * (m as f64 - 1.0)),
            z,
            Trans::No,
            &s,
            Trans::No,
            0.0,
            &mut g,
        )?;
        Ok((loss, g))
    }

    /// `∂L/∂Z = 2/(c^t (m−1)) · Z·S` for the batch just passed to
    /// [`update`](Self::update), with the history held constant. The factor
    /// 2 comes from each `z_ni` entering both `φ_ij` and `φ_ji`.
    pub fn gradient(&self, c_appx: &Matrix, z: &Matrix) -> Result<Matrix> {
        if self.step == 0 || self.norm_factor <= 0.0 {
            return Err(Error::State(
                "SDL gradient requested before any update".into(),
            ));
        }
        self.check_batch(z)?;
        if c_appx.shape() != (self.dim(), self.dim()) {
            return Err(Error::State(format!(
                "C_appx is {}x{} but the state is {2}x{2}",
                c_appx.rows(),
                c_appx.cols(),
                self.dim()
            )));
        }
        let m = z.rows();
        if m < 2 {
            return Err(Error::DegenerateBatch(format!(
                "SDL needs at least 2 rows, got {m}"
            )));
        }
        let s = off_diagonal_signs(c_appx);
        let mut g = Matrix::zeros(m, self.dim());
        let scale = 2.0 / (self.norm_factor * (m as f64 - 1.0));
        gemm(scale, z, Trans::No, &s, Trans::No, 0.0, &mut g)?;
        Ok(g)
    }
}

/// [`SignMatrix::from_cov`] as a dense matrix, in one pass.
pub(crate) fn off_diagonal_signs(c: &Matrix) -> Matrix {
    let k = c.rows();
    let mut s = c.map(|v| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    });
    for i in 0..k {
        s.set(i, i, 0.0);
    }
    s
}

/// Signs of the off-diagonal entries of a covariance; zero on the diagonal
/// and wherever the entry is exactly zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignMatrix {
    k: usize,
    entries: Vec<i8>,
}

impl SignMatrix {
    pub fn from_cov(c: &Matrix) -> Self {
        let k = c.rows();
        let mut entries = vec![0i8; k * k];
        for i in 0..k {
            for j in 0..k {
                let v = c.get(i, j);
                entries[i * k + j] = if i == j || v == 0.0 {
                    0
                } else if v > 0.0 {
                    1
                } else {
                    -1
                };
            }
        }
        SignMatrix { k, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.k + j]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.k, self.k, |i, j| f64::from(self.get(i, j)))
    }
}
