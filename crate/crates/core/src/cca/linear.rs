use crate::error::{Error, Result};
use crate::linalg::{
    center_columns, gemm, inv_sqrt_sym, matmul, matmul_tn, sym_eig, Matrix, Trans,
};

/// Ridge added to both within-view covariances unless configured otherwise.
pub const DEFAULT_RIDGE: f64 = 1e-4;

/// Singular values below this are treated as zero when recovering the
/// left singular vectors.
const SIGMA_FLOOR: f64 = 1e-10;

/// Closed-form CCA projections.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCcaModel {
    pub w1: Matrix,
    pub w2: Matrix,
    pub mean1: Vec<f64>,
    pub mean2: Vec<f64>,
    /// Descending, clipped to `[0, 1]`.
    pub canonical_correlations: Vec<f64>,
}

impl LinearCcaModel {
    pub fn k(&self) -> usize {
        self.canonical_correlations.len()
    }

    pub fn transform1(&self, x: &Matrix) -> Result<Matrix> {
        project(x, &self.mean1, &self.w1)
    }

    pub fn transform2(&self, x: &Matrix) -> Result<Matrix> {
        project(x, &self.mean2, &self.w2)
    }
}

fn project(x: &Matrix, mean: &[f64], w: &Matrix) -> Result<Matrix> {
    if x.cols() != mean.len() {
        return Err(Error::shape(format!(
            "projection expects {} features, got {}",
            mean.len(),
            x.cols()
        )));
    }
    let mut xc = x.clone();
    for r in 0..xc.rows() {
        for (v, m) in xc.row_mut(r).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    matmul(&xc, w)
}

fn covariance(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows() as f64;
    let mut c = Matrix::zeros(a.cols(), b.cols());
    gemm(1.0 / (n - 1.0), a, Trans::Yes, b, Trans::No, 0.0, &mut c)?;
    Ok(c)
}

/// Fits `k` canonical pairs. With `Σ₁₁`, `Σ₂₂` ridge-regularised,
/// `T = Σ₁₁^(−1/2) Σ₁₂ Σ₂₂^(−1/2)`; the right singular vectors `V` of `T`
/// come from the eigenvectors of `TᵀT` and the left ones as `U = TV/σ`,
/// which keeps each pair sign-consistent. Only when `σ` vanishes does `U`
/// fall back to an eigenvector of `TTᵀ`.
pub fn linear_cca_fit(x1: &Matrix, x2: &Matrix, k: usize, ridge: f64) -> Result<LinearCcaModel> {
    if x1.rows() != x2.rows() {
        return Err(Error::shape(format!(
            "views have {} and {} rows",
            x1.rows(),
            x2.rows()
        )));
    }
    let (d1, d2) = (x1.cols(), x2.cols());
    if k == 0 || k > d1.min(d2) {
        return Err(Error::config(format!(
            "k = {k} must lie in 1..={} for views of width {d1} and {d2}",
            d1.min(d2)
        )));
    }
    if x1.rows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "linear CCA needs at least 2 samples, got {}",
            x1.rows()
        )));
    }
    let (c1, mean1) = center_columns(x1);
    let (c2, mean2) = center_columns(x2);
    let a = inv_sqrt_sym(&covariance(&c1, &c1)?, ridge)?;
    let b = inv_sqrt_sym(&covariance(&c2, &c2)?, ridge)?;
    let s12 = covariance(&c1, &c2)?;
    let t = matmul(&matmul(&a, &s12)?, &b)?;

    let right = sym_eig(&matmul_tn(&t, &t)?)?;
    let mut left: Option<Matrix> = None;
    let mut u = Matrix::zeros(d1, k);
    let mut v = Matrix::zeros(d2, k);
    let mut sigmas = Vec::with_capacity(k);
    for j in 0..k {
        let sigma = right.values[j].max(0.0).sqrt();
        let vj = right.vectors.col(j);
        for (i, x) in vj.iter().enumerate() {
            v.set(i, j, *x);
        }
        if sigma > SIGMA_FLOOR {
            for i in 0..d1 {
                let tv: f64 = t.row(i).iter().zip(&vj).map(|(p, q)| p * q).sum();
                u.set(i, j, tv / sigma);
            }
        } else {
            if left.is_none() {
                left = Some(sym_eig(&crate::linalg::matmul_nt(&t, &t)?)?.vectors);
            }
            let l = left.as_ref().unwrap();
            for i in 0..d1 {
                u.set(i, j, l.get(i, j));
            }
        }
        sigmas.push(sigma.clamp(0.0, 1.0));
    }
    Ok(LinearCcaModel {
        w1: matmul(&a, &u)?,
        w2: matmul(&b, &v)?,
        mean1,
        mean2,
        canonical_correlations: sigmas,
    })
}
