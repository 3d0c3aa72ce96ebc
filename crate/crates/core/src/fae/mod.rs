//! Factorisation autoencoder: the code splits into a supervised part `y`
//! (read directly as class logits) and a free part `z`; a decorrelation
//! term on the batch-normalised code `[y, z]` pushes class information out
//! of `z`.

mod eval;
mod train;

pub use eval::{
    disentanglement_eval, style_sheet, style_transfer, write_pgm, y_scale, Disentanglement,
    StyleSheet,
};
pub use train::{FaeEpochMetrics, FaeTrainer};

use crate::cca::classifier::{cross_entropy, softmax_rows};
use crate::decorr::{DecorrVariant, Decorrelator};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{mlp_specs, Gradients, LayerSpec, MlpModel, Mode};
use crate::rng::{self, tags};

#[derive(Clone, Debug, PartialEq)]
pub struct FaeConfig {
    pub input_dim: usize,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    /// Class-code width (the number of classes).
    pub p: usize,
    /// Style-code width.
    pub q: usize,
    /// Weight of the classification loss on `y`.
    pub lambda1: f64,
    /// Weight of the decorrelation loss on `[y, z]`.
    pub lambda2: f64,
    pub alpha: f64,
    pub variant: DecorrVariant,
    pub lr: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub reset_accumulator_each_epoch: bool,
    /// Whether the batch norm feeding the decorrelation term learns its
    /// scale and shift. A learnable scale lets the decorrelation loss be
    /// driven to zero by shrinking it, so this is off by default.
    pub learn_code_bn_affine: bool,
}

impl Default for FaeConfig {
    fn default() -> Self {
        FaeConfig {
            input_dim: 784,
            hidden: vec![1000, 1000],
            p: 10,
            q: 10,
            lambda1: 1.0,
            lambda2: 0.1,
            alpha: 0.9,
            variant: DecorrVariant::Sdl,
            lr: 0.1,
            lr_decay: 0.85,
            momentum: 0.5,
            batch_size: 100,
            epochs: 20,
            seed: 0,
            reset_accumulator_each_epoch: false,
            learn_code_bn_affine: false,
        }
    }
}

impl FaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.p < 2 || self.q == 0 {
            return Err(Error::config(format!(
                "need input_dim > 0, p >= 2 and q > 0, got {}, {}, {}",
                self.input_dim, self.p, self.q
            )));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::config(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if !(self.lr >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "need lr >= 0 and momentum in [0,1), got lr={} momentum={}",
                self.lr, self.momentum
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::config(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn code_dim(&self) -> usize {
        self.p + self.q
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaeModel {
    pub encoder: MlpModel,
    pub decoder: MlpModel,
    /// Batch norm on `[y, z]` feeding only the decorrelation term.
    pub code_bn: MlpModel,
    pub decorr: Decorrelator,
    pub p: usize,
    pub q: usize,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Losses and gradients of one step.
#[derive(Clone, Debug)]
pub struct FaeStep {
    pub rec: f64,
    pub cla: f64,
    pub decorr: f64,
    /// `rec + λ₁·cla + λ₂·decorr`.
    pub total: f64,
    pub grads_encoder: Gradients,
    pub grads_decoder: Gradients,
    pub grads_code_bn: Gradients,
    /// Normalised code of this batch.
    pub code_bn_out: Matrix,
}

impl FaeStep {
    /// Gradients in [`FaeModel::params_flat`] order.
    pub fn flat_grads(&self) -> Vec<f64> {
        [
            self.grads_encoder.flat(),
            self.grads_decoder.flat(),
            self.grads_code_bn.flat(),
        ]
        .concat()
    }
}

/// Mean per-pixel squared error and its gradient.
pub(crate) fn reconstruction_loss(out: &Matrix, x: &Matrix) -> Result<(f64, Matrix)> {
    let diff = out.sub(x)?;
    let n = (x.rows() * x.cols()).max(1) as f64;
    let loss = diff.data().iter().map(|v| v * v).sum::<f64>() / n;
    Ok((loss, diff.scaled(2.0 / n)))
}

/// `[softmax(y), z]`: the code as seen by the decorrelation term.
pub(crate) fn decorr_view(code: &Matrix, p: usize) -> Matrix {
    let mut probs = code.col_block(0, p);
    softmax_rows(&mut probs);
    let mut out = code.clone();
    out.set_col_block(0, &probs);
    out
}

/// Pulls a gradient on [`decorr_view`]'s output back to the raw code.
pub(crate) fn decorr_view_backward(view: &Matrix, grad: &Matrix, p: usize) -> Matrix {
    let mut g = grad.clone();
    for r in 0..g.rows() {
        let probs = &view.row(r)[..p];
        let row = g.row_mut(r);
        let dot: f64 = row[..p].iter().zip(probs).map(|(a, b)| a * b).sum();
        for (gv, &pv) in row[..p].iter_mut().zip(probs) {
            *gv = pv * (*gv - dot);
        }
    }
    g
}

impl FaeModel {
    pub fn new(config: &FaeConfig) -> Result<Self> {
        config.validate()?;
        let k = config.code_dim();
        let enc = mlp_specs(config.input_dim, &config.hidden, k);
        let rev: Vec<usize> = config.hidden.iter().rev().copied().collect();
        let dec = mlp_specs(k, &rev, config.input_dim);
        Ok(FaeModel {
            encoder: MlpModel::init(&enc, &mut rng::stream(config.seed, tags::INIT_ENCODER))?,
            decoder: MlpModel::init(&dec, &mut rng::stream(config.seed, tags::INIT_DECODER))?,
            code_bn: MlpModel::init(
                &[LayerSpec::BatchNorm { dim: k }],
                &mut rng::stream(config.seed, 0),
            )?,
            decorr: Decorrelator::new(config.variant, k, config.alpha, config.p)?,
            p: config.p,
            q: config.q,
            lambda1: config.lambda1,
            lambda2: config.lambda2,
        })
    }

    fn check_labels(&self, x: &Matrix, labels: &[usize]) -> Result<()> {
        if labels.len() != x.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} images",
                labels.len(),
                x.rows()
            )));
        }
        Ok(())
    }

    pub fn objective_step(&mut self, x: &Matrix, labels: &[usize]) -> Result<FaeStep> {
        self.check_labels(x, labels)?;
        let te = self.encoder.forward(x, Mode::Train)?;
        let code = &te.output;
        let td = self.decoder.forward(code, Mode::Train)?;
        let (rec, g_out) = reconstruction_loss(&td.output, x)?;
        let (grads_decoder, mut g_code) = self.decoder.backward(&td, &g_out)?;

        let (cla, g_y) = cross_entropy(&code.col_block(0, self.p), labels)?;
        for r in 0..g_code.rows() {
            for (g, gy) in g_code.row_mut(r)[..self.p].iter_mut().zip(g_y.row(r)) {
                *g += self.lambda1 * gy;
            }
        }

        let view = decorr_view(code, self.p);
        let tb = self.code_bn.forward(&view, Mode::Train)?;
        let (dec, g_dec) = self.decorr.loss_grad(&tb.output)?;
        let (grads_code_bn, g_bn_in) = self.code_bn.backward(&tb, &g_dec.scaled(self.lambda2))?;
        g_code.axpy(1.0, &decorr_view_backward(&view, &g_bn_in, self.p))?;

        Ok(FaeStep {
            rec,
            cla,
            decorr: dec,
            total: rec + self.lambda1 * cla + self.lambda2 * dec,
            grads_encoder: self.encoder.backward_params(&te, &g_code)?,
            grads_decoder,
            grads_code_bn,
            code_bn_out: tb.output,
        })
    }

    /// The objective for `x` with every state held fixed.
    pub fn objective_frozen(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        self.check_labels(x, labels)?;
        let code = self.encoder.clone().forward(x, Mode::Train)?.output;
        let out = self.decoder.clone().forward(&code, Mode::Train)?.output;
        let (rec, _) = reconstruction_loss(&out, x)?;
        let (cla, _) = cross_entropy(&code.col_block(0, self.p), labels)?;
        let bn = self
            .code_bn
            .clone()
            .forward(&decorr_view(&code, self.p), Mode::Train)?
            .output;
        let dec = self.decorr.frozen_loss(&bn)?;
        Ok(rec + self.lambda1 * cla + self.lambda2 * dec)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        [
            self.encoder.params_flat(),
            self.decoder.params_flat(),
            self.code_bn.params_flat(),
        ]
        .concat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let (ne, nd) = (self.encoder.num_params(), self.decoder.num_params());
        if flat.len() != ne + nd + self.code_bn.num_params() {
            return Err(Error::shape(format!(
                "{} values for {} parameters",
                flat.len(),
                ne + nd + self.code_bn.num_params()
            )));
        }
        self.encoder.set_params_flat(&flat[..ne])?;
        self.decoder.set_params_flat(&flat[ne..ne + nd])?;
        self.code_bn.set_params_flat(&flat[ne + nd..])
    }

    /// Code `[y, z]` for each row.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.predict(x)
    }

    pub fn decode(&self, code: &Matrix) -> Result<Matrix> {
        self.decoder.predict(code)
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }

    pub fn code_dim(&self) -> usize {
        self.p + self.q
    }
}

#[cfg(test)]
mod tests;
