//! Dataset assembly from the `[data]` section.

use std::path::{Path, PathBuf};

use softcca_core::data::{load_idx, split_halves, subset_indices, synth_correlated, SynthSpec};
use softcca_core::{Matrix, PairedDataset};

use crate::config::{DataConfig, DataSource};
use crate::error::{CliError, Result};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Labelled images: a seeded training subset and the full test split.
#[derive(Clone, Debug)]
pub struct ImageData {
    pub train_x: Matrix,
    pub train_labels: Vec<usize>,
    pub test_x: Matrix,
    pub test_labels: Vec<usize>,
}

/// Training pairs and the held-out pairs used for evaluation.
#[derive(Clone, Debug)]
pub struct PairedData {
    pub train: PairedDataset,
    pub heldout: PairedDataset,
    /// Planted canonical correlations of synthetic data.
    pub planted: Option<Vec<f64>>,
}

/// `dir/name`, or `dir/name.gz` when only the compressed file exists.
pub fn idx_path(dir: &Path, name: &str) -> PathBuf {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    if !plain.exists() && gz.exists() {
        gz
    } else {
        plain
    }
}

pub fn load_images(cfg: &DataConfig) -> Result<ImageData> {
    if cfg.source != DataSource::Mnist {
        return Err(CliError::Usage(
            "this command needs `source = \"mnist\"` in [data]".into(),
        ));
    }
    let dir = &cfg.mnist_dir;
    let (x, labels) = load_idx(idx_path(dir, TRAIN_IMAGES), idx_path(dir, TRAIN_LABELS))?;
    let (test_x, test_labels) = load_idx(idx_path(dir, TEST_IMAGES), idx_path(dir, TEST_LABELS))?;
    let idx = subset_indices(x.rows(), cfg.train_subset, cfg.subset_seed)?;
    Ok(ImageData {
        train_x: x.select_rows(&idx),
        train_labels: idx.iter().map(|&i| labels[i]).collect(),
        test_x,
        test_labels,
    })
}

pub fn load_paired(cfg: &DataConfig) -> Result<PairedData> {
    match cfg.source {
        DataSource::Mnist => {
            let img = load_images(cfg)?;
            Ok(PairedData {
                train: split_halves(&img.train_x, Some(img.train_labels))?,
                heldout: split_halves(&img.test_x, Some(img.test_labels))?,
                planted: None,
            })
        }
        DataSource::Synth => {
            let n = cfg.synth_n;
            let spec = SynthSpec {
                n: n + cfg.synth_heldout,
                d1: cfg.synth_d1,
                d2: cfg.synth_d2,
                rho: cfg.synth_rho.clone(),
                seed: cfg.synth_seed,
            };
            let (all, planted) = synth_correlated(&spec)?;
            let train: Vec<usize> = (0..n).collect();
            let held: Vec<usize> = (n..spec.n).collect();
            Ok(PairedData {
                train: all.select(&train),
                heldout: all.select(&held),
                planted: Some(planted),
            })
        }
    }
}
