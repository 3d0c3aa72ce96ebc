//! Datasets: IDX ingestion, two-view construction, synthetic correlated
//! views with known canonical correlations, and seeded mini-batching.

mod batch;
mod idx;
mod synth;
mod views;

pub use batch::{batch_indices, subset_indices, BatchPlan};
pub use idx::{
    load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages,
};
pub use synth::{random_orthogonal, synth_correlated, SynthSpec};
pub use views::{join_halves, split_halves, IMAGE_SIDE};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `N` aligned samples seen through two views.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    pub view1: Matrix,
    pub view2: Matrix,
    pub labels: Option<Vec<usize>>,
    pub meta: String,
}

impl PairedDataset {
    pub fn new(
        view1: Matrix,
        view2: Matrix,
        labels: Option<Vec<usize>>,
        meta: impl Into<String>,
    ) -> Result<Self> {
        if view1.rows() != view2.rows() {
            return Err(Error::shape(format!(
                "views have {} and {} rows",
                view1.rows(),
                view2.rows()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != view1.rows() {
                return Err(Error::shape(format!(
                    "{} labels for {} samples",
                    l.len(),
                    view1.rows()
                )));
            }
        }
        Ok(PairedDataset {
            view1,
            view2,
            labels,
            meta: meta.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.view1.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.view1.cols(), self.view2.cols())
    }

    /// Rows `idx` of both views (and labels), in that order.
    pub fn select(&self, idx: &[usize]) -> PairedDataset {
        PairedDataset {
            view1: self.view1.select_rows(idx),
            view2: self.view2.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            meta: self.meta.clone(),
        }
    }

    pub fn labels_or_err(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or_else(|| {
            Error::DegenerateLabels(format!("dataset {:?} has no labels", self.meta))
        })
    }
}

#[cfg(test)]
mod tests;
