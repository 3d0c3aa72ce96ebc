use std::io::Write;
use std::path::Path;

use super::FaeModel;
use crate::cca::classifier::{accuracy_pct, argmax};
use crate::cca::{ClassifierConfig, SoftmaxClassifier};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Classification accuracies (percent) from each half of the code.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disentanglement {
    pub acc_y: f64,
    pub acc_z: f64,
}

/// `acc_y` reads the class off `argmax y` on the test set; `acc_z` comes
/// from a softmax classifier trained on the training set's `z` codes.
pub fn disentanglement_eval(
    model: &FaeModel,
    train_x: &Matrix,
    train_labels: &[usize],
    test_x: &Matrix,
    test_labels: &[usize],
    cfg: &ClassifierConfig,
) -> Result<Disentanglement> {
    let k = model.code_dim();
    let test_code = model.encode(test_x)?;
    let acc_y = accuracy_pct(&test_code.col_block(0, model.p), test_labels);
    let train_z = model.encode(train_x)?.col_block(model.p, k);
    let clf = SoftmaxClassifier::fit(&train_z, train_labels, model.p, cfg)?;
    let acc_z = clf.accuracy(&test_code.col_block(model.p, k), test_labels)?;
    Ok(Disentanglement { acc_y, acc_z })
}

/// Mean over rows of the largest `y` activation.
pub fn y_scale(model: &FaeModel, x: &Matrix) -> Result<f64> {
    let y = model.encode(x)?.col_block(0, model.p);
    if y.rows() == 0 {
        return Err(Error::DegenerateInput(
            "y_scale needs at least one image".into(),
        ));
    }
    let s: f64 = (0..y.rows()).map(|r| y.row(r)[argmax(y.row(r))]).sum();
    Ok(s / y.rows() as f64)
}

/// Re-renders each row of `images` as `target_class`: the inferred `z` is
/// kept and `y` becomes `scale · onehot(target_class)`. Output clamped to
/// `[0, 1]`.
pub fn style_transfer(
    model: &FaeModel,
    images: &Matrix,
    target_class: usize,
    scale: f64,
) -> Result<Matrix> {
    if target_class >= model.p {
        return Err(Error::config(format!(
            "target class {target_class} out of range for {} classes",
            model.p
        )));
    }
    let mut code = model.encode(images)?;
    for r in 0..code.rows() {
        let row = code.row_mut(r);
        row[..model.p].iter_mut().for_each(|v| *v = 0.0);
        row[target_class] = scale;
    }
    Ok(model.decode(&code)?.map(|v| v.clamp(0.0, 1.0)))
}

/// An 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StyleSheet {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// One row per source image (its style), one column per class.
pub fn style_sheet(
    model: &FaeModel,
    sources: &Matrix,
    side: usize,
    scale: f64,
) -> Result<StyleSheet> {
    if side * side != sources.cols() {
        return Err(Error::shape(format!(
            "{} pixels do not form a {side}x{side} image",
            sources.cols()
        )));
    }
    let classes = model.p;
    let (width, height) = (classes * side, sources.rows() * side);
    let mut pixels = vec![0u8; width * height];
    for c in 0..classes {
        let out = style_transfer(model, sources, c, scale)?;
        for s in 0..sources.rows() {
            for (i, v) in out.row(s).iter().enumerate() {
                let (y, x) = (s * side + i / side, c * side + i % side);
                pixels[y * width + x] = (v * 255.0).round() as u8;
            }
        }
    }
    Ok(StyleSheet {
        width,
        height,
        pixels,
    })
}

/// Binary PGM (P5, maxval 255).
pub fn write_pgm(path: impl AsRef<Path>, sheet: &StyleSheet) -> Result<()> {
    let path = path.as_ref();
    if sheet.pixels.len() != sheet.width * sheet.height {
        return Err(Error::shape(format!(
            "{} pixels for a {}x{} image",
            sheet.pixels.len(),
            sheet.width,
            sheet.height
        )));
    }
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    write!(f, "P5\n{} {}\n255\n", sheet.width, sheet.height).map_err(io)?;
    f.write_all(&sheet.pixels).map_err(io)?;
    f.flush().map_err(io)
}
