use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// How an epoch is cut into mini-batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
    pub drop_last: bool,
}

impl BatchPlan {
    pub fn new(batch_size: usize, seed: u64, drop_last: bool) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::config(format!(
                "batch size must be at least 2, got {batch_size}"
            )));
        }
        Ok(BatchPlan {
            batch_size,
            seed,
            drop_last,
        })
    }

    /// Number of batches per epoch over `n` samples.
    pub fn batches_per_epoch(&self, n: usize) -> usize {
        let (full, rem) = (n / self.batch_size, n % self.batch_size);
        if self.drop_last || rem == 0 || (rem == 1 && full > 0) {
            full
        } else {
            full + 1
        }
    }
}

/// Index batches for one epoch: a Fisher–Yates shuffle seeded by
/// `(seed, epoch)`, cut into consecutive chunks. A ragged tail of a single
/// sample is merged into the previous batch so every batch has `m >= 2`.
pub fn batch_indices(n: usize, plan: &BatchPlan, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if plan.batch_size > n {
        return Err(Error::config(format!(
            "batch size {} exceeds the {n} available samples",
            plan.batch_size
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(plan.seed, (tags::SHUFFLE << 32) | (epoch & 0xffff_ffff));
    order.shuffle(&mut r);
    let mut out: Vec<Vec<usize>> = order
        .chunks(plan.batch_size)
        .map(<[usize]>::to_vec)
        .collect();
    if let Some(last) = out.last() {
        if last.len() < plan.batch_size {
            if plan.drop_last {
                out.pop();
            } else if last.len() == 1 {
                let tail = out.pop().unwrap();
                out.last_mut().unwrap().extend(tail);
            }
        }
    }
    Ok(out)
}

/// The first `size` indices of a seeded shuffle of `0..n`.
pub fn subset_indices(n: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > n {
        return Err(Error::config(format!(
            "subset of {size} requested from {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, tags::SUBSET));
    order.truncate(size);
    Ok(order)
}
