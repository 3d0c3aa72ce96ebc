#![allow(dead_code)]

use std::path::Path;

use rand::Rng;
use softcca_cli::config::{DataConfig, DataSource};
use softcca_cli::data::{TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use softcca_cli::ExperimentConfig;
use softcca_core::data::{write_idx_images, write_idx_labels, IdxImages};
use softcca_core::rng;

/// Writes a small MNIST-shaped dataset: each class is a horizontal band at
/// its own height, drawn across both halves with a per-image thickness and
/// pixel noise.
pub fn write_fake_mnist(dir: &Path, train: usize, test: usize, classes: usize) {
    let mut r = rng::stream(99, 0);
    let mut make = |n: usize| {
        let mut pixels = Vec::with_capacity(n * 784);
        let labels: Vec<u8> = (0..n).map(|i| (i % classes) as u8).collect();
        for &c in &labels {
            let centre = 3 + 2 * c as i64;
            let half: i64 = r.random_range(0..2);
            let shift: f64 = r.random_range(0.0..0.5);
            for y in 0..28i64 {
                for x in 0..28 {
                    let on = (y - centre).abs() <= half;
                    let base = if on {
                        0.9 - shift * (x as f64 / 28.0)
                    } else {
                        0.05
                    };
                    let v = (base + r.random_range(-0.05..0.05f64)).clamp(0.0, 1.0);
                    pixels.push((v * 255.0).round() as u8);
                }
            }
        }
        (
            IdxImages {
                count: n,
                rows: 28,
                cols: 28,
                pixels,
            },
            labels,
        )
    };
    let (ti, tl) = make(train);
    let (ei, el) = make(test);
    write_idx_images(dir.join(TRAIN_IMAGES), &ti).unwrap();
    write_idx_labels(dir.join(TRAIN_LABELS), &tl).unwrap();
    write_idx_images(dir.join(TEST_IMAGES), &ei).unwrap();
    write_idx_labels(dir.join(TEST_LABELS), &el).unwrap();
}

/// A quick Soft CCA configuration on fake MNIST in `dir`.
pub fn fake_mnist_cca_config(dir: &Path, train_subset: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.data = DataConfig {
        source: DataSource::Mnist,
        mnist_dir: dir.to_path_buf(),
        train_subset,
        ..Default::default()
    };
    c.model.hidden = Some(vec![16]);
    c.model.k = Some(4);
    c.losses.lambda = Some(0.5);
    c.training.lr = Some(0.01);
    c.training.batch_size = Some(32);
    c.training.epochs = Some(3);
    c.training.seed = 5;
    c.eval.folds = 3;
    c.eval.classifier_epochs = 5;
    c
}

/// A quick linear Soft CCA configuration on synthetic views.
pub fn synth_cca_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.data = DataConfig {
        source: DataSource::Synth,
        synth_n: 500,
        synth_heldout: 200,
        synth_d1: 6,
        synth_d2: 5,
        synth_rho: vec![0.9, 0.6],
        synth_seed: 1,
        ..Default::default()
    };
    c.model.hidden = Some(vec![8]);
    c.model.k = Some(2);
    c.losses.lambda = Some(1.0);
    c.training.lr = Some(0.02);
    c.training.batch_size = Some(64);
    c.training.epochs = Some(3);
    c.training.seed = 11;
    c
}

/// A quick FAE configuration on fake MNIST in `dir`.
pub fn fake_mnist_fae_config(dir: &Path, train_subset: usize) -> ExperimentConfig {
    let mut c = fake_mnist_cca_config(dir, train_subset);
    c.model.k = None;
    c.model.hidden = Some(vec![32]);
    c.model.p = Some(10);
    c.model.q = Some(3);
    c.losses.lambda = None;
    c.losses.lambda2 = Some(0.1);
    c.training.lr = Some(0.05);
    c
}
