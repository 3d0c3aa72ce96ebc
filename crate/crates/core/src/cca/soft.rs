use super::eval::correlation_strength;
use super::l2_dist_loss;
use crate::data::{batch_indices, BatchPlan, PairedDataset};
use crate::decorr::{DecorrVariant, Decorrelator};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{mlp_specs, Gradients, LayerGrad, LayerSpec, MlpModel, Mode, Sgd};
use crate::rng::{self, tags};

/// Hyperparameters of a Soft CCA run.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftCcaConfig {
    /// Hidden widths of each branch; the embedding layer of width `k` and a
    /// batch norm follow.
    pub hidden: Vec<usize>,
    pub k: usize,
    /// Weight of the decorrelation terms.
    pub lambda: f64,
    pub alpha: f64,
    pub variant: DecorrVariant,
    pub lr: f64,
    /// Per-epoch multiplicative learning-rate decay; epoch `e` runs at
    /// `lr · lr_decay^e`.
    pub lr_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Whether the embedding batch norm learns its scale and shift. With a
    /// learnable scale the objective is minimised by shrinking both
    /// embeddings towards zero, so this is off by default.
    pub learn_bn_affine: bool,
    /// Clears both accumulators at the start of every epoch.
    pub reset_accumulator_each_epoch: bool,
}

impl Default for SoftCcaConfig {
    fn default() -> Self {
        SoftCcaConfig {
            hidden: vec![500, 300],
            k: 50,
            lambda: 0.2,
            alpha: 0.9,
            variant: DecorrVariant::Sdl,
            lr: 0.001,
            lr_decay: 1.0,
            momentum: 0.9,
            batch_size: 100,
            epochs: 20,
            seed: 0,
            learn_bn_affine: false,
            reset_accumulator_each_epoch: false,
        }
    }
}

impl SoftCcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("embedding dimension k must be positive"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::config(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.variant == DecorrVariant::XCov {
            return Err(Error::config(
                "xcov needs two code blocks and is not available for Soft CCA",
            ));
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

    pub fn branch_specs(&self, input: usize) -> Vec<LayerSpec> {
        let mut specs = mlp_specs(input, &self.hidden, self.k);
        specs.push(LayerSpec::BatchNorm { dim: self.k });
        specs
    }
}

/// Both branches and their decorrelation states.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftCcaModel {
    pub branch1: MlpModel,
    pub branch2: MlpModel,
    pub decorr1: Decorrelator,
    pub decorr2: Decorrelator,
    pub lambda: f64,
    pub k: usize,
}

/// Losses and gradients of one training step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub dist: f64,
    pub decorr1: f64,
    pub decorr2: f64,
    /// `dist + λ·(decorr1 + decorr2)`.
    pub total: f64,
    pub grads1: Gradients,
    pub grads2: Gradients,
}

impl SoftCcaModel {
    pub fn new(config: &SoftCcaConfig, d1: usize, d2: usize) -> Result<Self> {
        config.validate()?;
        let branch1 = MlpModel::init(
            &config.branch_specs(d1),
            &mut rng::stream(config.seed, tags::INIT_BRANCH1),
        )?;
        let branch2 = MlpModel::init(
            &config.branch_specs(d2),
            &mut rng::stream(config.seed, tags::INIT_BRANCH2),
        )?;
        let dec = Decorrelator::new(config.variant, config.k, config.alpha, 0)?;
        Ok(SoftCcaModel {
            branch1,
            branch2,
            decorr1: dec.clone(),
            decorr2: dec,
            lambda: config.lambda,
            k: config.k,
        })
    }

    /// One forward/backward pass of `L_dist + λ(L₁ + L₂)` in train mode.
    /// Updates batch-norm running statistics and the decorrelation
    /// accumulators; parameters are left to the caller.
    pub fn objective_step(&mut self, x1: &Matrix, x2: &Matrix) -> Result<StepOutput> {
        self.check_batch(x1, x2)?;
        let t1 = self.branch1.forward(x1, Mode::Train)?;
        let t2 = self.branch2.forward(x2, Mode::Train)?;
        let (dist, mut g1, mut g2) = l2_dist_loss(&t1.output, &t2.output)?;
        let (l1, d1) = self.decorr1.loss_grad(&t1.output)?;
        let (l2, d2) = self.decorr2.loss_grad(&t2.output)?;
        g1.axpy(self.lambda, &d1)?;
        g2.axpy(self.lambda, &d2)?;
        Ok(StepOutput {
            dist,
            decorr1: l1,
            decorr2: l2,
            total: dist + self.lambda * (l1 + l2),
            grads1: self.branch1.backward_params(&t1, &g1)?,
            grads2: self.branch2.backward_params(&t2, &g2)?,
        })
    }

    /// The objective `objective_step` would report, with every state held
    /// fixed.
    pub fn objective_frozen(&self, x1: &Matrix, x2: &Matrix) -> Result<f64> {
        self.check_batch(x1, x2)?;
        let z1 = self.branch1.clone().forward(x1, Mode::Train)?.output;
        let z2 = self.branch2.clone().forward(x2, Mode::Train)?.output;
        let (dist, _, _) = l2_dist_loss(&z1, &z2)?;
        Ok(
            dist + self.lambda
                * (self.decorr1.frozen_loss(&z1)? + self.decorr2.frozen_loss(&z2)?),
        )
    }

    fn check_batch(&self, x1: &Matrix, x2: &Matrix) -> Result<()> {
        if x1.rows() != x2.rows() {
            return Err(Error::shape(format!(
                "paired batch has {} and {} rows",
                x1.rows(),
                x2.rows()
            )));
        }
        Ok(())
    }

    /// Eval-mode embedding of view 1.
    pub fn embed1(&self, x: &Matrix) -> Result<Matrix> {
        self.branch1.predict(x)
    }

    pub fn embed2(&self, x: &Matrix) -> Result<Matrix> {
        self.branch2.predict(x)
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (
            self.branch1.input_dim().unwrap_or(0),
            self.branch2.input_dim().unwrap_or(0),
        )
    }
}

/// Epoch means of the step losses.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub dist_loss: f64,
    pub sdl1: f64,
    pub sdl2: f64,
    pub total: f64,
    pub corr_strength_heldout: Option<f64>,
}

/// Running sums for the epoch in progress.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochAccum {
    pub dist: f64,
    pub decorr1: f64,
    pub decorr2: f64,
    pub total: f64,
    pub batches: u64,
}

/// Resumable Soft CCA training loop. All state needed to continue a run
/// bit-identically lives in public fields.
#[derive(Clone, Debug)]
pub struct SoftCcaTrainer {
    pub config: SoftCcaConfig,
    pub model: SoftCcaModel,
    pub opt1: Sgd,
    pub opt2: Sgd,
    /// Epoch in progress.
    pub epoch: u64,
    /// Index of the next batch within the epoch.
    pub batch: usize,
    /// Optimisation steps taken so far.
    pub step: u64,
    pub accum: EpochAccum,
}

impl SoftCcaTrainer {
    pub fn new(config: SoftCcaConfig, d1: usize, d2: usize) -> Result<Self> {
        let model = SoftCcaModel::new(&config, d1, d2)?;
        Self::from_model(config, model)
    }

    pub fn from_model(config: SoftCcaConfig, model: SoftCcaModel) -> Result<Self> {
        config.validate()?;
        let opt1 = Sgd::new(config.lr, config.momentum, &model.branch1)?;
        let opt2 = Sgd::new(config.lr, config.momentum, &model.branch2)?;
        Ok(SoftCcaTrainer {
            config,
            model,
            opt1,
            opt2,
            epoch: 0,
            batch: 0,
            step: 0,
            accum: EpochAccum::default(),
        })
    }

    pub fn plan(&self) -> Result<BatchPlan> {
        BatchPlan::new(self.config.batch_size, self.config.seed, false)
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs as u64
    }

    pub fn epoch_lr(&self) -> f64 {
        self.config.lr * self.config.lr_decay.powi(self.epoch as i32)
    }

    /// Runs the next mini-batch. Returns the epoch's metrics when this step
    /// completes it.
    pub fn train_step(&mut self, data: &PairedDataset) -> Result<Option<EpochMetrics>> {
        if self.is_done() {
            return Err(Error::State("training already finished".into()));
        }
        let batches = batch_indices(data.len(), &self.plan()?, self.epoch)?;
        if self.batch == 0 && self.epoch > 0 && self.config.reset_accumulator_each_epoch {
            self.model.decorr1.reset();
            self.model.decorr2.reset();
        }
        let lr = self.epoch_lr();
        self.opt1.lr = lr;
        self.opt2.lr = lr;
        let idx = &batches[self.batch];
        let x1 = data.view1.select_rows(idx);
        let x2 = data.view2.select_rows(idx);
        let mut out = self.model.objective_step(&x1, &x2)?;
        if !out.total.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                what: "Soft CCA objective".into(),
            });
        }
        if !self.config.learn_bn_affine {
            freeze_embedding_bn(&mut out.grads1);
            freeze_embedding_bn(&mut out.grads2);
        }
        self.opt1.step(&mut self.model.branch1, &out.grads1)?;
        self.opt2.step(&mut self.model.branch2, &out.grads2)?;
        self.step += 1;
        self.batch += 1;
        self.accum.dist += out.dist;
        self.accum.decorr1 += out.decorr1;
        self.accum.decorr2 += out.decorr2;
        self.accum.total += out.total;
        self.accum.batches += 1;
        if self.batch < batches.len() {
            return Ok(None);
        }
        let n = self.accum.batches as f64;
        let metrics = EpochMetrics {
            epoch: self.epoch,
            dist_loss: self.accum.dist / n,
            sdl1: self.accum.decorr1 / n,
            sdl2: self.accum.decorr2 / n,
            total: self.accum.total / n,
            corr_strength_heldout: None,
        };
        self.accum = EpochAccum::default();
        self.batch = 0;
        self.epoch += 1;
        Ok(Some(metrics))
    }

    /// Trains to completion, scoring `heldout` after every epoch when given.
    pub fn run(
        &mut self,
        data: &PairedDataset,
        heldout: Option<&PairedDataset>,
    ) -> Result<Vec<EpochMetrics>> {
        let mut log = Vec::new();
        while !self.is_done() {
            if let Some(mut m) = self.train_step(data)? {
                if let Some(h) = heldout {
                    m.corr_strength_heldout = Some(self.heldout_correlation(h)?);
                }
                log.push(m);
            }
        }
        Ok(log)
    }

    pub fn heldout_correlation(&self, data: &PairedDataset) -> Result<f64> {
        let z1 = self.model.embed1(&data.view1)?;
        let z2 = self.model.embed2(&data.view2)?;
        Ok(correlation_strength(&z1, &z2)?.total)
    }
}

fn freeze_embedding_bn(grads: &mut Gradients) {
    if let Some(LayerGrad::BatchNorm { gamma, beta }) = grads.layers.last_mut() {
        gamma.iter_mut().for_each(|g| *g = 0.0);
        beta.iter_mut().for_each(|g| *g = 0.0);
    }
}
