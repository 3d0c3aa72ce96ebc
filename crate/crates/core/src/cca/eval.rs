use rand::seq::SliceRandom;

use super::classifier::{ClassifierConfig, SoftmaxClassifier};
use crate::error::{Error, Result};
use crate::linalg::{pearson, Matrix};
use crate::rng::{self, tags};

/// Per-dimension Pearson correlations between two embeddings of the same
/// samples and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub per_dim: Vec<f64>,
    pub total: f64,
    /// The embedding dimension, the largest attainable total.
    pub upper_bound: usize,
}

/// Sums `pearson(z1[:, d], z2[:, d])` over dimensions. A column with zero
/// variance contributes 0.
pub fn correlation_strength(z1: &Matrix, z2: &Matrix) -> Result<CorrelationReport> {
    if z1.shape() != z2.shape() {
        return Err(Error::shape(format!(
            "correlation between {}x{} and {}x{} embeddings",
            z1.rows(),
            z1.cols(),
            z2.rows(),
            z2.cols()
        )));
    }
    let mut per_dim = Vec::with_capacity(z1.cols());
    for d in 0..z1.cols() {
        let r = match pearson(&z1.col(d), &z2.col(d)) {
            Ok(r) => r,
            Err(Error::DegenerateInput(_)) => 0.0,
            Err(e) => return Err(e),
        };
        per_dim.push(r);
    }
    Ok(CorrelationReport {
        total: per_dim.iter().sum(),
        upper_bound: z1.cols(),
        per_dim,
    })
}

/// Fold accuracies (percent) of a classifier trained on one view and tested
/// on the other.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossViewReport {
    pub fold_accuracy: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
}

impl CrossViewReport {
    fn from_folds(fold_accuracy: Vec<f64>) -> Self {
        let n = fold_accuracy.len() as f64;
        let mean = fold_accuracy.iter().sum::<f64>() / n;
        let std = if fold_accuracy.len() > 1 {
            (fold_accuracy
                .iter()
                .map(|a| (a - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        CrossViewReport {
            fold_accuracy,
            mean,
            std,
        }
    }
}

/// `folds`-fold cross-validation over one labelled set: for each fold a
/// softmax classifier is trained on the view-A embeddings of the other
/// folds and scored on the view-B embeddings of the held-out fold.
pub fn cross_view_eval(
    emb_a: &Matrix,
    emb_b: &Matrix,
    labels: &[usize],
    folds: usize,
    cfg: &ClassifierConfig,
) -> Result<CrossViewReport> {
    if emb_a.shape() != emb_b.shape() || labels.len() != emb_a.rows() {
        return Err(Error::shape(format!(
            "cross-view evaluation of {}x{} vs {}x{} embeddings with {} labels",
            emb_a.rows(),
            emb_a.cols(),
            emb_b.rows(),
            emb_b.cols(),
            labels.len()
        )));
    }
    if folds < 2 || folds > labels.len() {
        return Err(Error::config(format!(
            "{folds} folds requested for {} samples",
            labels.len()
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, tags::FOLDS));
    let mut accs = Vec::with_capacity(folds);
    for f in 0..folds {
        let lo = f * order.len() / folds;
        let hi = (f + 1) * order.len() / folds;
        let test = &order[lo..hi];
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let clf = SoftmaxClassifier::fit(&emb_a.select_rows(&train), &train_labels, classes, cfg)?;
        accs.push(clf.accuracy(&emb_b.select_rows(test), &test_labels)?);
    }
    Ok(CrossViewReport::from_folds(accs))
}
