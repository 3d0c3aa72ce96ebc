use super::{FaeConfig, FaeModel};
use crate::data::{batch_indices, BatchPlan};
use crate::decorr::{mean_abs_off_diagonal, minibatch_cov};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::Sgd;

/// Epoch means of the step losses.
#[derive(Clone, Debug, PartialEq)]
pub struct FaeEpochMetrics {
    pub epoch: u64,
    pub rec: f64,
    pub cla: f64,
    pub decorr: f64,
    pub total: f64,
    /// Mean absolute off-diagonal of the normalised code's covariance:
    /// `C_appx` at epoch end for accumulating variants, otherwise the epoch
    /// mean of the mini-batch value.
    pub code_offdiag: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaeAccum {
    pub rec: f64,
    pub cla: f64,
    pub decorr: f64,
    pub total: f64,
    pub offdiag: f64,
    pub batches: u64,
}

/// Resumable FAE training loop.
#[derive(Clone, Debug)]
pub struct FaeTrainer {
    pub config: FaeConfig,
    pub model: FaeModel,
    pub opt_encoder: Sgd,
    pub opt_decoder: Sgd,
    pub opt_code_bn: Sgd,
    pub epoch: u64,
    pub batch: usize,
    pub step: u64,
    pub accum: FaeAccum,
}

impl FaeTrainer {
    pub fn new(config: FaeConfig) -> Result<Self> {
        let model = FaeModel::new(&config)?;
        Self::from_model(config, model)
    }

    pub fn from_model(config: FaeConfig, model: FaeModel) -> Result<Self> {
        config.validate()?;
        Ok(FaeTrainer {
            opt_encoder: Sgd::new(config.lr, config.momentum, &model.encoder)?,
            opt_decoder: Sgd::new(config.lr, config.momentum, &model.decoder)?,
            opt_code_bn: Sgd::new(config.lr, config.momentum, &model.code_bn)?,
            config,
            model,
            epoch: 0,
            batch: 0,
            step: 0,
            accum: FaeAccum::default(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs as u64
    }

    pub fn epoch_lr(&self) -> f64 {
        self.config.lr * self.config.lr_decay.powi(self.epoch as i32)
    }

    pub fn train_step(
        &mut self,
        images: &Matrix,
        labels: &[usize],
    ) -> Result<Option<FaeEpochMetrics>> {
        if self.is_done() {
            return Err(Error::State("training already finished".into()));
        }
        if labels.len() != images.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} images",
                labels.len(),
                images.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.model.p) {
            return Err(Error::config(format!(
                "label {bad} out of range for a {}-dimensional class code",
                self.model.p
            )));
        }
        let plan = BatchPlan::new(self.config.batch_size, self.config.seed, false)?;
        let batches = batch_indices(images.rows(), &plan, self.epoch)?;
        if self.batch == 0 && self.epoch > 0 && self.config.reset_accumulator_each_epoch {
            self.model.decorr.reset();
        }
        let lr = self.epoch_lr();
        self.opt_encoder.lr = lr;
        self.opt_decoder.lr = lr;
        self.opt_code_bn.lr = lr;
        let idx = &batches[self.batch];
        let x = images.select_rows(idx);
        let lb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let out = self.model.objective_step(&x, &lb)?;
        if !out.total.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                what: "FAE objective".into(),
            });
        }
        self.opt_encoder
            .step(&mut self.model.encoder, &out.grads_encoder)?;
        self.opt_decoder
            .step(&mut self.model.decoder, &out.grads_decoder)?;
        if self.config.learn_code_bn_affine {
            self.opt_code_bn
                .step(&mut self.model.code_bn, &out.grads_code_bn)?;
        }
        self.step += 1;
        self.batch += 1;
        self.accum.rec += out.rec;
        self.accum.cla += out.cla;
        self.accum.decorr += out.decorr;
        self.accum.total += out.total;
        self.accum.offdiag += mean_abs_off_diagonal(&minibatch_cov(&out.code_bn_out)?);
        self.accum.batches += 1;
        if self.batch < batches.len() {
            return Ok(None);
        }
        let n = self.accum.batches as f64;
        let state = &self.model.decorr.state;
        let code_offdiag =
            if self.model.decorr.variant.uses_accumulator() && state.norm_factor > 0.0 {
                mean_abs_off_diagonal(&state.c_accu.scaled(1.0 / state.norm_factor))
            } else {
                self.accum.offdiag / n
            };
        let m = FaeEpochMetrics {
            epoch: self.epoch,
            rec: self.accum.rec / n,
            cla: self.accum.cla / n,
            decorr: self.accum.decorr / n,
            total: self.accum.total / n,
            code_offdiag,
        };
        self.accum = FaeAccum::default();
        self.batch = 0;
        self.epoch += 1;
        Ok(Some(m))
    }

    pub fn run(&mut self, images: &Matrix, labels: &[usize]) -> Result<Vec<FaeEpochMetrics>> {
        let mut log = Vec::new();
        while !self.is_done() {
            log.extend(self.train_step(images, labels)?);
        }
        Ok(log)
    }
}
