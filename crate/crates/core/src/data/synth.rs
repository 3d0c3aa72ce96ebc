use rand::Rng as _;
use rand_distr::StandardNormal;

use super::PairedDataset;
use crate::error::{Error, Result};
use crate::linalg::{matmul_nt, Matrix};
use crate::rng::{self, tags, Rng};

/// Parameters for [`synth_correlated`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    /// Planted canonical correlations, one per shared dimension.
    pub rho: Vec<f64>,
    pub seed: u64,
}

/// Two views sharing `rho.len()` latent factors with population canonical
/// correlations exactly `rho`.
///
/// Each view is `[s + ε, η] · Qᵀ`: `s ~ N(0, I)` is shared, `ε` is
/// independent per view with variance `(1−ρ)/ρ` on each shared coordinate,
/// `η ~ N(0, I)` fills the remaining dimensions and `Q` is a random
/// orthogonal mixing. Then `corr(s_j + ε1_j, s_j + ε2_j) = 1/(1 + (1−ρ)/ρ) = ρ`
/// and the invertible mixing leaves canonical correlations unchanged.
///
/// Returns the dataset and the planted correlations.
pub fn synth_correlated(spec: &SynthSpec) -> Result<(PairedDataset, Vec<f64>)> {
    let k = spec.rho.len();
    if k > spec.d1.min(spec.d2) {
        return Err(Error::config(format!(
            "{k} shared dimensions do not fit views of width {} and {}",
            spec.d1, spec.d2
        )));
    }
    if let Some(bad) = spec.rho.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::config(format!(
            "planted correlation {bad} is outside (0, 1]"
        )));
    }
    let mut r = rng::stream(spec.seed, tags::SYNTH);
    let q1 = random_orthogonal(spec.d1, &mut r);
    let q2 = random_orthogonal(spec.d2, &mut r);
    let sd: Vec<f64> = spec.rho.iter().map(|&p| ((1.0 - p) / p).sqrt()).collect();
    let shared = Matrix::from_fn(spec.n, k, |_, _| r.sample(StandardNormal));
    let latent = |d: usize, r: &mut Rng| {
        Matrix::from_fn(spec.n, d, |i, j| {
            let e: f64 = r.sample(StandardNormal);
            if j < k {
                shared.get(i, j) + sd[j] * e
            } else {
                e
            }
        })
    };
    let u1 = latent(spec.d1, &mut r);
    let u2 = latent(spec.d2, &mut r);
    let ds = PairedDataset::new(
        matmul_nt(&u1, &q1)?,
        matmul_nt(&u2, &q2)?,
        None,
        format!(
            "synthetic n={} rho={:?} seed={}",
            spec.n, spec.rho, spec.seed
        ),
    )?;
    Ok((ds, spec.rho.clone()))
}

/// Haar-distributed orthogonal matrix from Gram–Schmidt (with one
/// reorthogonalisation pass) on a Gaussian matrix.
pub fn random_orthogonal(d: usize, r: &mut Rng) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| r.sample(StandardNormal));
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| g.col(j)).collect();
    for j in 0..d {
        for _ in 0..2 {
            for i in 0..j {
                let p: f64 = cols[j].iter().zip(&cols[i]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (v, u) in tail[0].iter_mut().zip(&head[i]) {
                    *v -= p * u;
                }
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    Matrix::from_fn(d, d, |i, j| cols[j][i])
}
