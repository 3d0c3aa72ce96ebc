//! The IDX container: a big-endian header (two zero bytes, a type code, a
//! dimension count, then one `u32` per dimension) followed by raw bytes.
//! Files may be gzip-wrapped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

/// Raw image bytes with their header dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// One image per row, pixels scaled by `1/255`.
    pub fn to_matrix(&self) -> Matrix {
        let data = self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Matrix::from_vec(self.count, self.rows * self.cols, data).expect("header dimensions")
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn truncated(&self, want: usize) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            msg: format!(
                "truncated at byte offset {}: needed {want} more bytes, file has {}",
                self.pos,
                self.bytes.len()
            ),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.truncated(n));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn parse_header<'a>(
    path: &'a Path,
    bytes: &'a [u8],
    magic: u32,
) -> Result<(Cursor<'a>, Vec<usize>)> {
    let mut cur = Cursor {
        path,
        bytes,
        pos: 0,
    };
    let got = cur.u32()?;
    if got != magic {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("bad magic number {got} at byte offset 0, expected {magic}"),
        });
    }
    let ndim = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(cur.u32()? as usize);
    }
    Ok((cur, dims))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let (mut cur, dims) = parse_header(path, &bytes, IMAGES_MAGIC)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = cur.take(count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let (mut cur, dims) = parse_header(path, &bytes, LABELS_MAGIC)?;
    Ok(cur.take(dims[0])?.to_vec())
}

/// Images as an `N × rows·cols` matrix in `[0, 1]` plus their labels.
pub fn load_idx(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<(Matrix, Vec<usize>)> {
    let img = read_idx_images(images.as_ref())?;
    let lab = read_idx_labels(labels.as_ref())?;
    if lab.len() != img.count {
        return Err(Error::Format {
            path: labels.as_ref().to_path_buf(),
            msg: format!("{} labels for {} images", lab.len(), img.count),
        });
    }
    Ok((img.to_matrix(), lab.into_iter().map(usize::from).collect()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes an uncompressed image file.
pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::shape(format!(
            "{} pixels for {}×{}×{} images",
            images.pixels.len(),
            images.count,
            images.rows,
            images.cols
        )));
    }
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    write_file(path.as_ref(), &out)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    write_file(path.as_ref(), &out)
}
