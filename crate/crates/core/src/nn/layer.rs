use super::column_sums;
use crate::error::{Error, Result};
use crate::linalg::{column_means, column_variances, gemm, Matrix, Trans};

use super::Mode;

pub const BN_EPS: f64 = 1e-5;
/// Weight of the old running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Affine { input: usize, output: usize },
    Relu,
    BatchNorm { dim: usize },
}

impl LayerSpec {
    pub fn input_dim(&self) -> Option<usize> {
        match *self {
            LayerSpec::Affine { input, .. } => Some(input),
            LayerSpec::BatchNorm { dim } => Some(dim),
            LayerSpec::Relu => None,
        }
    }

    pub fn output_dim(&self) -> Option<usize> {
        match *self {
            LayerSpec::Affine { output, .. } => Some(output),
            LayerSpec::BatchNorm { dim } => Some(dim),
            LayerSpec::Relu => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn forward_train(&mut self, x: &Matrix) -> (Matrix, Matrix, Vec<f64>) {
        let m = x.rows();
        let mean = column_means(x);
        let var = column_variances(x, &mean);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = x.clone();
        for r in 0..m {
            for ((v, mu), is) in xhat.row_mut(r).iter_mut().zip(&mean).zip(&inv_std) {
                *v = (*v - mu) * is;
            }
        }
        let y = self.affine(&xhat);
        let unbias = m as f64 / (m as f64 - 1.0);
        for j in 0..self.dim() {
            self.running_mean[j] =
                self.momentum * self.running_mean[j] + (1.0 - self.momentum) * mean[j];
            self.running_var[j] =
                self.momentum * self.running_var[j] + (1.0 - self.momentum) * var[j] * unbias;
        }
        (y, xhat, inv_std)
    }

    fn forward_eval(&self, x: &Matrix) -> Matrix {
        let mut xhat = x.clone();
        for r in 0..x.rows() {
            for (j, v) in xhat.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.running_mean[j]) / (self.running_var[j] + self.eps).sqrt();
            }
        }
        self.affine(&xhat)
    }

    fn affine(&self, xhat: &Matrix) -> Matrix {
        let mut y = xhat.clone();
        for r in 0..y.rows() {
            for ((v, g), b) in y.row_mut(r).iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = *v * g + b;
            }
        }
        y
    }

    /// Returns `(dx, dγ, dβ)`.
    pub(crate) fn backward(
        &self,
        dy: &Matrix,
        xhat: &Matrix,
        inv_std: &[f64],
    ) -> (Matrix, Vec<f64>, Vec<f64>) {
        let m = dy.rows() as f64;
        let k = self.dim();
        let dbeta = column_sums(dy);
        let mut dgamma = vec![0.0; k];
        let mut sum_dxhat = vec![0.0; k];
        let mut sum_dxhat_xhat = vec![0.0; k];
        for r in 0..dy.rows() {
            for j in 0..k {
                let g = dy.get(r, j);
                let xh = xhat.get(r, j);
                dgamma[j] += g * xh;
                let dxh = g * self.gamma[j];
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * xh;
            }
        }
        let mut dx = Matrix::zeros(dy.rows(), k);
        for r in 0..dy.rows() {
            for j in 0..k {
                let dxh = dy.get(r, j) * self.gamma[j];
                let v =
                    inv_std[j] / m * (m * dxh - sum_dxhat[j] - xhat.get(r, j) * sum_dxhat_xhat[j]);
                dx.set(r, j, v);
            }
        }
        (dx, dgamma, dbeta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// `y = x·W + b` with `W` stored input×output.
    Affine {
        w: Matrix,
        b: Vec<f64>,
    },
    Relu,
    BatchNorm(BatchNorm),
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Affine { w, .. } => LayerSpec::Affine {
                input: w.rows(),
                output: w.cols(),
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::BatchNorm(bn) => LayerSpec::BatchNorm { dim: bn.dim() },
        }
    }

    pub(crate) fn forward(
        &mut self,
        x: &Matrix,
        mode: Mode,
    ) -> Result<(Matrix, Option<(Matrix, Vec<f64>)>)> {
        match (self, mode) {
            (Layer::BatchNorm(bn), Mode::Train) => {
                check_width(x, bn.dim())?;
                let (y, xhat, inv_std) = bn.forward_train(x);
                Ok((y, Some((xhat, inv_std))))
            }
            (layer, _) => Ok((layer.forward_eval(x)?, None)),
        }
    }

    pub(crate) fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Affine { w, b } => {
                check_width(x, w.rows())?;
                let mut y = Matrix::zeros(x.rows(), w.cols());
                for r in 0..y.rows() {
                    y.row_mut(r).copy_from_slice(b);
                }
                gemm(1.0, x, Trans::No, w, Trans::No, 1.0, &mut y)?;
                Ok(y)
            }
            Layer::Relu => Ok(x.map(|v| v.max(0.0))),
            Layer::BatchNorm(bn) => {
                check_width(x, bn.dim())?;
                Ok(bn.forward_eval(x))
            }
        }
    }
}

fn check_width(x: &Matrix, want: usize) -> Result<()> {
    if x.cols() != want {
        return Err(Error::shape(format!(
            "layer expects {want} features, got {}",
            x.cols()
        )));
    }
    Ok(())
}
