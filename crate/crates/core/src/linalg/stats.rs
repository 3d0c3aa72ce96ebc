use super::Matrix;
use crate::error::{Error, Result};

/// Sample Pearson correlation of two equally long vectors.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape(format!(
            "pearson needs equal lengths, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let n = u.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "pearson needs n >= 2, got {n}"
        )));
    }
    let mu = u.iter().sum::<f64>() / n as f64;
    let mv = v.iter().sum::<f64>() / n as f64;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu == 0.0 || svv == 0.0 {
        return Err(Error::DegenerateInput(
            "pearson input has zero variance".into(),
        ));
    }
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

pub fn column_means(x: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    let n = x.rows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Biased (1/n) per-column variances around the given means.
pub fn column_variances(x: &Matrix, means: &[f64]) -> Vec<f64> {
    let mut var = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(means) {
            let d = v - m;
            *s += d * d;
        }
    }
    let n = x.rows().max(1) as f64;
    var.iter_mut().for_each(|s| *s /= n);
    var
}

/// Subtracts the column means; returns the centred copy and the means.
pub fn center_columns(x: &Matrix) -> (Matrix, Vec<f64>) {
    let means = column_means(x);
    let mut c = x.clone();
    for r in 0..c.rows() {
        for (v, m) in c.row_mut(r).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    (c, means)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let u = [1.0, 2.0, 5.0, -1.0];
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        assert!((pearson(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&u, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_formula() {
        // means 2 and 7/3; deviations (-1,0,1) and (-4/3,-1/3,5/3)
        let sxy: f64 = 4.0 / 3.0 + 5.0 / 3.0;
        let sxx: f64 = 2.0;
        let syy: f64 = (16.0 + 1.0 + 25.0) / 9.0;
        let want = sxy / (sxx * syy).sqrt();
        let got = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.981_980_506_061_965_7).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(Error::DegenerateInput(_))
        ));
    }
}
