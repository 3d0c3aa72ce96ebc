use crate::data::{batch_indices, BatchPlan};
use crate::error::{Error, Result};
use crate::linalg::{column_means, column_variances, gemm, Matrix, Trans};
use crate::nn::column_sums;

/// Training settings for [`SoftmaxClassifier`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    /// Weight decay on `W` (not on the bias).
    pub l2: f64,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-4,
            lr: 0.05,
            momentum: 0.9,
            epochs: 30,
            batch_size: 100,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression on standardised features.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxClassifier {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(logits: &mut Matrix) {
    for r in 0..logits.rows() {
        let row = logits.row_mut(r);
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
}

/// Mean cross-entropy of `logits` against `labels` and its gradient with
/// respect to the logits.
pub(crate) fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} rows",
            labels.len(),
            logits.rows()
        )));
    }
    let c = logits.cols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::config(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    let m = logits.rows() as f64;
    let mut p = logits.clone();
    softmax_rows(&mut p);
    let mut loss = 0.0;
    for (r, &l) in labels.iter().enumerate() {
        loss -= p.get(r, l).max(f64::MIN_POSITIVE).ln();
        p.set(r, l, p.get(r, l) - 1.0);
    }
    p.scale(1.0 / m);
    Ok((loss / m, p))
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Percentage of rows whose argmax matches the label.
pub(crate) fn accuracy_pct(scores: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(r, &l)| argmax(scores.row(*r)) == l)
        .count();
    100.0 * hits as f64 / labels.len() as f64
}

impl SoftmaxClassifier {
    pub fn fit(
        x: &Matrix,
        labels: &[usize],
        classes: usize,
        cfg: &ClassifierConfig,
    ) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} rows",
                labels.len(),
                x.rows()
            )));
        }
        let mut seen = vec![false; classes];
        for &l in labels {
            if l >= classes {
                return Err(Error::config(format!(
                    "label {l} out of range for {classes} classes"
                )));
            }
            seen[l] = true;
        }
        let distinct = seen.iter().filter(|s| **s).count();
        if distinct < 2 {
            return Err(Error::DegenerateLabels(format!(
                "classifier training data has {distinct} distinct class"
            )));
        }
        let mean = column_means(x);
        let scale: Vec<f64> = column_variances(x, &mean)
            .into_iter()
            .map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        let mut clf = SoftmaxClassifier {
            w: Matrix::zeros(x.cols(), classes),
            b: vec![0.0; classes],
            mean,
            scale,
        };
        let xs = clf.standardize(x);
        let plan = BatchPlan::new(cfg.batch_size.min(x.rows()).max(2), cfg.seed, false)?;
        let mut vw = Matrix::zeros(x.cols(), classes);
        let mut vb = vec![0.0; classes];
        for epoch in 0..cfg.epochs {
            for idx in batch_indices(x.rows(), &plan, epoch as u64)? {
                let xb = xs.select_rows(&idx);
                let lb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                let (_, g) = cross_entropy(&clf.logits_std(&xb)?, &lb)?;
                let mut gw = clf.w.scaled(cfg.l2);
                gemm(1.0, &xb, Trans::Yes, &g, Trans::No, 1.0, &mut gw)?;
                let gb = column_sums(&g);
                vw.scale(cfg.momentum);
                vw.axpy(-cfg.lr, &gw)?;
                clf.w.axpy(1.0, &vw)?;
                for ((b, v), g) in clf.b.iter_mut().zip(&mut vb).zip(&gb) {
                    *v = cfg.momentum * *v - cfg.lr * g;
                    *b += *v;
                }
            }
        }
        Ok(clf)
    }

    fn standardize(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) * s;
            }
        }
        out
    }

    fn logits_std(&self, xs: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(xs.rows(), self.w.cols());
        gemm(1.0, xs, Trans::No, &self.w, Trans::No, 0.0, &mut out)?;
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        Ok(out)
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::shape(format!(
                "classifier expects {} features, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        self.logits_std(&self.standardize(x))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let l = self.logits(x)?;
        Ok((0..l.rows()).map(|r| argmax(l.row(r))).collect())
    }

    /// Accuracy in percent.
    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        Ok(accuracy_pct(&self.logits(x)?, labels))
    }
}
