use super::PairedDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IMAGE_SIDE: usize = 28;
const HALF: usize = IMAGE_SIDE / 2;

/// Left (image columns 0..14) and right (14..28) halves of each 28×28 row.
pub fn split_halves(images: &Matrix, labels: Option<Vec<usize>>) -> Result<PairedDataset> {
    if images.cols() != IMAGE_SIDE * IMAGE_SIDE {
        return Err(Error::shape(format!(
            "split_halves expects {} pixels per image, got {}",
            IMAGE_SIDE * IMAGE_SIDE,
            images.cols()
        )));
    }
    let n = images.rows();
    let mut left = Vec::with_capacity(n * IMAGE_SIDE * HALF);
    let mut right = Vec::with_capacity(n * IMAGE_SIDE * HALF);
    for r in 0..n {
        for line in images.row(r).chunks_exact(IMAGE_SIDE) {
            left.extend_from_slice(&line[..HALF]);
            right.extend_from_slice(&line[HALF..]);
        }
    }
    let d = IMAGE_SIDE * HALF;
    PairedDataset::new(
        Matrix::from_vec(n, d, left)?,
        Matrix::from_vec(n, d, right)?,
        labels,
        "left/right image halves",
    )
}

/// Inverse of [`split_halves`].
pub fn join_halves(left: &Matrix, right: &Matrix) -> Result<Matrix> {
    let d = IMAGE_SIDE * HALF;
    if left.cols() != d || right.cols() != d || left.rows() != right.rows() {
        return Err(Error::shape(format!(
            "join_halves expects two N×{d} halves, got {}x{} and {}x{}",
            left.rows(),
            left.cols(),
            right.rows(),
            right.cols()
        )));
    }
    let n = left.rows();
    let mut data = Vec::with_capacity(n * IMAGE_SIDE * IMAGE_SIDE);
    for r in 0..n {
        for (a, b) in left
            .row(r)
            .chunks_exact(HALF)
            .zip(right.row(r).chunks_exact(HALF))
        {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
    }
    Matrix::from_vec(n, IMAGE_SIDE * IMAGE_SIDE, data)
}
