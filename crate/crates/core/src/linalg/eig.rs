//! Symmetric eigendecomposition.
//!
//! [`sym_eig`] reduces to tridiagonal form with Householder reflections and
//! then runs implicit-shift QL (the EISPACK tred2/tql2 pair). The working
//! matrix is held transposed so every inner loop walks a contiguous row.
//! [`sym_eig_jacobi`] is an independent cyclic Jacobi solver, slower but
//! simple, kept as a cross-check.

use super::{dot, Matrix, Trans};
use crate::error::{Error, Result};

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEig {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for r in 0..n {
            let row = scaled.row_mut(r);
            for (x, &l) in row.iter_mut().zip(&self.values) {
                *x *= f(l);
            }
        }
        let mut out = Matrix::zeros(n, n);
        super::gemm(
            1.0,
            &scaled,
            Trans::No,
            &self.vectors,
            Trans::Yes,
            0.0,
            &mut out,
        )
        .expect("square factors");
        out
    }

    fn sorted_from_transposed(d: Vec<f64>, mt: &Matrix) -> SymEig {
        let n = d.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        let values = order.iter().map(|&i| d[i]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (c, &src) in order.iter().enumerate() {
            let v = mt.row(src);
            for r in 0..n {
                vectors.set(r, c, v[r]);
            }
        }
        SymEig { values, vectors }
    }
}

const QL_MAX_ITER: usize = 60;

/// Eigendecomposition of a symmetric matrix. The input is symmetrised as
/// `(A + Aᵀ)/2` first.
pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    a.check_square("sym_eig")?;
    let n = a.rows();
    if n == 0 {
        return Ok(SymEig {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }
    // Vᵀ starts as A, which is its own transpose once symmetrised.
    let mut mt = a.symmetrized()?;
    if !mt.is_finite() {
        return Err(Error::Numeric(
            "sym_eig input contains non-finite entries".into(),
        ));
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut mt, &mut d, &mut e);
    tridiagonal_ql(&mut mt, &mut d, &mut e)?;
    Ok(SymEig::sorted_from_transposed(d, &mt))
}

/// Householder reduction to tridiagonal form. On return `mt` holds Qᵀ,
/// `d` the diagonal and `e[1..]` the sub-diagonal.
fn tridiagonalize(mt: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = mt.get(j, n - 1);
    }

    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|v| v.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = mt.get(j, i - 1);
                mt.set(j, i, 0.0);
                mt.set(i, j, 0.0);
            }
        } else {
            for v in &mut d[..i] {
                *v /= scale;
                h += *v * *v;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|v| *v = 0.0);

            // e = A·u restricted to the leading i×i block (upper triangle of mt).
            for j in 0..i {
                let f = d[j];
                mt.set(i, j, f);
                let row = &mt.row(j)[..i];
                let mut g = e[j] + row[j] * f;
                let tail = &row[j + 1..i];
                g += dot(tail, &d[j + 1..i]);
                for (ek, &r) in e[j + 1..i].iter_mut().zip(tail) {
                    *ek += r * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let row = &mut mt.row_mut(j)[j..i];
                for ((r, &ek), &dk) in row.iter_mut().zip(&e[j..i]).zip(&d[j..i]) {
                    *r -= f * ek + g * dk;
                }
                d[j] = mt.get(j, i - 1);
                mt.set(j, i, 0.0);
            }
        }
        d[i] = h;
    }

    // Accumulate the reflections.
    for i in 0..n - 1 {
        let diag = mt.get(i, i);
        mt.set(i, n - 1, diag);
        mt.set(i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            let (head, tail) = mt.data_mut().split_at_mut((i + 1) * n);
            let u = &tail[..i + 1];
            for k in 0..=i {
                d[k] = u[k] / h;
            }
            for j in 0..=i {
                let row = &mut head[j * n..j * n + i + 1];
                let g = dot(u, row);
                for (r, &dk) in row.iter_mut().zip(&d[..=i]) {
                    *r -= g * dk;
                }
            }
        }
        mt.row_mut(i + 1)[..=i].iter_mut().for_each(|v| *v = 0.0);
    }
    for j in 0..n {
        d[j] = mt.get(j, n - 1);
        mt.set(j, n - 1, 0.0);
    }
    mt.set(n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal (d, e), rotating the rows of `mt`.
fn tridiagonal_ql(mt: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::Numeric(format!(
                        "tridiagonal QL did not converge for eigenvalue {l} after {QL_MAX_ITER} iterations"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for v in &mut d[l + 2..n] {
                    *v -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = mt.data_mut().split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver: at most 100 sweeps, stopping once the
/// off-diagonal Frobenius norm falls below `1e-12·‖A‖_F`.
pub fn sym_eig_jacobi(a: &Matrix) -> Result<SymEig> {
    a.check_square("sym_eig_jacobi")?;
    let n = a.rows();
    let mut a = a.symmetrized()?;
    let norm = a.frobenius_norm();
    let tol = 1e-12 * norm;
    // Rows of `vt` are the eigenvectors.
    let mut vt = Matrix::identity(n);
    let mut converged = n <= 1;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    a.set(r, p, c * arp - s * arq);
                    a.set(r, q, s * arp + c * arq);
                }
                for r in 0..n {
                    let apr = a.get(p, r);
                    let aqr = a.get(q, r);
                    a.set(p, r, c * apr - s * aqr);
                    a.set(q, r, s * apr + c * aqr);
                }
                for r in 0..n {
                    let vp = vt.get(p, r);
                    let vq = vt.get(q, r);
                    vt.set(p, r, c * vp - s * vq);
                    vt.set(q, r, s * vp + c * vq);
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }
    Ok(SymEig::sorted_from_transposed(a.diag(), &vt))
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// `(A + ridge·I)^(-1/2)` for symmetric positive semi-definite `A`.
pub fn inv_sqrt_sym(a: &Matrix, ridge: f64) -> Result<Matrix> {
    if !(ridge >= 0.0) {
        return Err(Error::config(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    a.check_square("inv_sqrt_sym")?;
    let mut shifted = a.clone();
    shifted.add_diag(ridge);
    let eig = sym_eig(&shifted)?;
    if let Some(&smallest) = eig.values.last() {
        if smallest <= 0.0 {
            return Err(Error::Numeric(format!(
                "inverse square root needs a positive definite matrix; smallest eigenvalue is {smallest:e}"
            )));
        }
    }
    let b = eig.reconstruct_with(|l| 1.0 / l.sqrt());
    b.symmetrized()
}
