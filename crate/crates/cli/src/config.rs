//! Experiment configuration: a TOML file with one table per concern.
//!
//! Every table rejects unknown keys. Optional hyperparameters left out of
//! the file fall back to the defaults of the command being run, so one file
//! can drive both `train-cca` and `train-fae`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softcca_core::cca::ClassifierConfig;
use softcca_core::{DecorrVariant, FaeConfig, SoftCcaConfig};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub losses: LossConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Mnist,
    Synth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory holding the four MNIST IDX files (optionally gzipped).
    pub mnist_dir: PathBuf,
    /// Training images drawn from the 60000-image training split.
    pub train_subset: usize,
    pub subset_seed: u64,
    pub synth_n: usize,
    /// Extra synthetic pairs from the same distribution used as held-out data.
    pub synth_heldout: usize,
    pub synth_d1: usize,
    pub synth_d2: usize,
    pub synth_rho: Vec<f64>,
    pub synth_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Mnist,
            mnist_dir: PathBuf::from("data/mnist"),
            train_subset: 10_000,
            subset_seed: 0,
            synth_n: 20_000,
            synth_heldout: 5_000,
            synth_d1: 20,
            synth_d2: 20,
            synth_rho: vec![0.9, 0.7, 0.5],
            synth_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learn_bn_affine: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub seed: u64,
    pub reset_accumulator_each_epoch: bool,
    /// Write `checkpoint-step<N>.bin` every this many steps (0 = never).
    pub checkpoint_every: u64,
    /// Stop after this many steps, leaving `checkpoint.bin` to resume from.
    /// Dropped from the snapshot of a resumed run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halt_after_steps: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Soft CCA decorrelation weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// FAE classification weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    /// FAE decorrelation weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// One of sdl, decov, decov_l1, decov_gc, xcov, none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub folds: usize,
    /// Score held-out correlation strength after every Soft CCA epoch.
    pub heldout_correlation: bool,
    pub classifier_l2: f64,
    pub classifier_lr: f64,
    pub classifier_momentum: f64,
    pub classifier_epochs: usize,
    pub classifier_batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        EvalConfig {
            folds: 5,
            heldout_correlation: true,
            classifier_l2: c.l2,
            classifier_lr: c.lr,
            classifier_momentum: c.momentum,
            classifier_epochs: c.epochs,
            classifier_batch_size: c.batch_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub k_list: Vec<usize>,
    pub m: usize,
    pub reps: usize,
    pub warmup: usize,
    /// Inner repetitions are added until one timed sample lasts at least
    /// this long.
    pub min_sample_seconds: f64,
    pub alpha: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            k_list: vec![128, 256, 512, 1024, 2048],
            m: 64,
            reps: 20,
            warmup: 2,
            min_sample_seconds: 0.005,
            alpha: 0.9,
            ridge: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs/default"),
        }
    }
}

/// `line L, column C` of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |p| before.len() - p - 1)
        + 1;
    (line, col)
}

impl ExperimentConfig {
    /// Parses TOML text. `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().replace('\n', " ");
            match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    CliError::config(origin, format!("line {line}, column {col}: {msg}"))
                }
                None => CliError::config(origin, msg),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    fn variant(&self) -> Result<Option<DecorrVariant>> {
        self.losses
            .variant
            .as_deref()
            .map(|s| {
                s.parse()
                    .map_err(|e: softcca_core::Error| CliError::config("[losses]", e.to_string()))
            })
            .transpose()
    }

    pub fn soft_cca_config(&self) -> Result<SoftCcaConfig> {
        let d = SoftCcaConfig::default();
        let t = &self.training;
        let cfg = SoftCcaConfig {
            hidden: self.model.hidden.clone().unwrap_or(d.hidden),
            k: self.model.k.unwrap_or(d.k),
            lambda: self.losses.lambda.unwrap_or(d.lambda),
            alpha: self.losses.alpha.unwrap_or(d.alpha),
            variant: self.variant()?.unwrap_or(d.variant),
            lr: t.lr.unwrap_or(d.lr),
            lr_decay: t.lr_decay.unwrap_or(d.lr_decay),
            momentum: t.momentum.unwrap_or(d.momentum),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            epochs: t.epochs.unwrap_or(d.epochs),
            seed: t.seed,
            learn_bn_affine: self.model.learn_bn_affine.unwrap_or(d.learn_bn_affine),
            reset_accumulator_each_epoch: t.reset_accumulator_each_epoch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fae_config(&self, input_dim: usize) -> Result<FaeConfig> {
        let d = FaeConfig::default();
        let t = &self.training;
        let cfg = FaeConfig {
            input_dim,
            hidden: self.model.hidden.clone().unwrap_or(d.hidden),
            p: self.model.p.unwrap_or(d.p),
            q: self.model.q.unwrap_or(d.q),
            lambda1: self.losses.lambda1.unwrap_or(d.lambda1),
            lambda2: self.losses.lambda2.unwrap_or(d.lambda2),
            alpha: self.losses.alpha.unwrap_or(d.alpha),
            variant: self.variant()?.unwrap_or(d.variant),
            lr: t.lr.unwrap_or(d.lr),
            lr_decay: t.lr_decay.unwrap_or(d.lr_decay),
            momentum: t.momentum.unwrap_or(d.momentum),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            epochs: t.epochs.unwrap_or(d.epochs),
            seed: t.seed,
            reset_accumulator_each_epoch: t.reset_accumulator_each_epoch,
            learn_code_bn_affine: self.model.learn_bn_affine.unwrap_or(d.learn_code_bn_affine),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        let e = &self.eval;
        ClassifierConfig {
            l2: e.classifier_l2,
            lr: e.classifier_lr,
            momentum: e.classifier_momentum,
            epochs: e.classifier_epochs,
            batch_size: e.classifier_batch_size,
            seed: self.training.seed,
        }
    }
}
