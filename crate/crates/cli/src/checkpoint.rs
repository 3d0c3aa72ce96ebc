//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"SCCACKPT"
//! version  u32
//! kind     u32 length + UTF-8
//! config   u64 length + UTF-8 TOML snapshot
//! counters u32 count, then (u32 name length + name, u64 value) each
//! tensors  u32 count, then (u32 name length + name, u32 ndim,
//!          ndim × u64 dims, product(dims) × f64) each
//! crc32    u32 over every preceding byte
//! ```

use std::path::Path;

use softcca_core::decorr::Decorrelator;
use softcca_core::{Matrix, MlpModel, Sgd};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"SCCACKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: String,
    pub counters: Vec<(String, u64)>,
    pub tensors: Vec<(String, Tensor)>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize) -> std::result::Result<String, String> {
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| "invalid UTF-8 string".to_string())
    }
}

impl Checkpoint {
    pub fn new(kind: &str, config: String) -> Self {
        Checkpoint {
            kind: kind.to_string(),
            config,
            ..Default::default()
        }
    }

    pub fn push_counter(&mut self, name: impl Into<String>, v: u64) {
        self.counters.push((name.into(), v));
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.tensors.push((name.into(), Tensor { dims, data }));
    }

    pub fn push_matrix(&mut self, name: impl Into<String>, m: &Matrix) {
        self.push_tensor(name, vec![m.rows(), m.cols()], m.data().to_vec());
    }

    pub fn push_scalar(&mut self, name: impl Into<String>, v: f64) {
        self.push_tensor(name, vec![], vec![v]);
    }

    pub fn counter(&self, name: &str) -> Result<u64> {
        self.counters
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| CliError::Compatibility(format!("checkpoint lacks counter {name:?}")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| CliError::Compatibility(format!("checkpoint lacks tensor {name:?}")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let t = self.tensor(name)?;
        match t.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(CliError::Compatibility(format!(
                "tensor {name:?} is not a scalar"
            ))),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix> {
        let t = self.tensor(name)?;
        match t.dims.as_slice() {
            &[r, c] => Ok(Matrix::from_vec(r, c, t.data.clone())?),
            _ => Err(CliError::Compatibility(format!(
                "tensor {name:?} is not a matrix"
            ))),
        }
    }

    /// Copies a tensor into `dst`, which must have the same length.
    pub fn fill(&self, name: &str, dst: &mut [f64]) -> Result<()> {
        let t = self.tensor(name)?;
        if t.data.len() != dst.len() {
            return Err(CliError::Compatibility(format!(
                "tensor {name:?} has {} values, the model expects {}",
                t.data.len(),
                dst.len()
            )));
        }
        dst.copy_from_slice(&t.data);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.counters.len() as u32).to_le_bytes());
        for (name, v) in &self.counters {
            put_str(&mut out, name);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses a checkpoint. The checksum is verified before anything else
    /// is read.
    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < MAGIC.len() + 8 {
            return Err("file too short to be a checkpoint".into());
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err("not a checkpoint (bad magic)".into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(format!(
                "checksum mismatch (stored {stored:08x}, computed {actual:08x}); refusing to load"
            ));
        }
        let mut r = Reader {
            buf: body,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            ));
        }
        let len = r.u32()? as usize;
        let kind = r.string(len)?;
        let len = usize::try_from(r.u64()?).map_err(|_| "config length overflows".to_string())?;
        let config = r.string(len)?;
        let mut counters = Vec::new();
        for _ in 0..r.u32()? {
            let len = r.u32()? as usize;
            let name = r.string(len)?;
            counters.push((name, r.u64()?));
        }
        let mut tensors = Vec::new();
        for _ in 0..r.u32()? {
            let len = r.u32()? as usize;
            let name = r.string(len)?;
            let ndim = r.u32()? as usize;
            let mut dims = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                dims.push(
                    usize::try_from(r.u64()?).map_err(|_| "dimension overflows".to_string())?,
                );
            }
            let count = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| format!("tensor {name:?} size overflows"))?;
            let raw = r.take(count.checked_mul(8).ok_or("tensor size overflows")?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, Tensor { dims, data }));
        }
        if r.pos != body.len() {
            return Err(format!("{} trailing bytes", body.len() - r.pos));
        }
        Ok(Checkpoint {
            kind,
            config,
            counters,
            tensors,
        })
    }

    /// Writes through a temporary file so a crash never leaves a torn
    /// checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("bin.tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| CliError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|msg| CliError::checkpoint(path, msg))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(CliError::Compatibility(format!(
                "checkpoint holds a {:?} run, expected {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn push_model(&mut self, prefix: &str, model: &MlpModel) {
        for (i, s) in model.param_slices().into_iter().enumerate() {
            self.push_tensor(format!("{prefix}.param.{i}"), vec![s.len()], s.to_vec());
        }
        for (i, s) in model.buffer_slices().into_iter().enumerate() {
            self.push_tensor(format!("{prefix}.buffer.{i}"), vec![s.len()], s.to_vec());
        }
    }

    pub fn restore_model(&self, prefix: &str, model: &mut MlpModel) -> Result<()> {
        for (i, s) in model.param_slices_mut().into_iter().enumerate() {
            self.fill(&format!("{prefix}.param.{i}"), s)?;
        }
        for (i, s) in model.buffer_slices_mut().into_iter().enumerate() {
            self.fill(&format!("{prefix}.buffer.{i}"), s)?;
        }
        Ok(())
    }

    pub fn push_optimizer(&mut self, prefix: &str, opt: &Sgd) {
        for (i, v) in opt.velocity.iter().enumerate() {
            self.push_tensor(format!("{prefix}.velocity.{i}"), vec![v.len()], v.clone());
        }
    }

    pub fn restore_optimizer(&self, prefix: &str, opt: &mut Sgd) -> Result<()> {
        for (i, v) in opt.velocity.iter_mut().enumerate() {
            self.fill(&format!("{prefix}.velocity.{i}"), v)?;
        }
        Ok(())
    }

    pub fn push_decorrelator(&mut self, prefix: &str, d: &Decorrelator) {
        self.push_matrix(format!("{prefix}.c_accu"), &d.state.c_accu);
        self.push_scalar(format!("{prefix}.norm_factor"), d.state.norm_factor);
        self.push_counter(format!("{prefix}.step"), d.state.step);
    }

    pub fn restore_decorrelator(&self, prefix: &str, d: &mut Decorrelator) -> Result<()> {
        let c = self.matrix(&format!("{prefix}.c_accu"))?;
        if c.shape() != d.state.c_accu.shape() {
            return Err(CliError::Compatibility(format!(
                "{prefix} accumulator is {}x{}, the model expects {}x{}",
                c.rows(),
                c.cols(),
                d.state.c_accu.rows(),
                d.state.c_accu.cols()
            )));
        }
        d.state.c_accu = c;
        d.state.norm_factor = self.scalar(&format!("{prefix}.norm_factor"))?;
        d.state.step = self.counter(&format!("{prefix}.step"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new("soft_cca", "[training]\nseed = 3\n".into());
        c.push_counter("step", 42);
        c.push_scalar("x", f64::NAN);
        c.push_matrix("m", &Matrix::from_rows(&[[1.0, -2.5], [3.0, 1e-300]]));
        c.push_tensor("empty", vec![0], vec![]);
        c
    }

    #[test]
    fn byte_round_trip() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.kind, c.kind);
        assert_eq!(back.config, c.config);
        assert_eq!(back.counters, c.counters);
        assert!(back.scalar("x").unwrap().is_nan());
        assert_eq!(back.matrix("m").unwrap(), c.matrix("m").unwrap());
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), VERSION);
    }

    #[test]
    fn every_single_bit_flip_is_refused() {
        let good = sample().to_bytes();
        for i in 0..good.len() {
            let mut bad = good.clone();
            bad[i] ^= 0x10;
            assert!(
                Checkpoint::from_bytes(&bad).is_err(),
                "flip at byte {i} accepted"
            );
        }
    }

    #[test]
    fn corrupted_payload_names_checksum() {
        let mut b = sample().to_bytes();
        let n = b.len();
        b[n - 10] ^= 1;
        let err = Checkpoint::from_bytes(&b).unwrap_err();
        assert!(err.contains("checksum"), "{err}");
    }

    #[test]
    fn truncation_is_refused() {
        let b = sample().to_bytes();
        for cut in [0, 5, 12, b.len() / 2, b.len() - 1] {
            assert!(Checkpoint::from_bytes(&b[..cut]).is_err());
        }
    }

    #[test]
    fn missing_entries_are_compatibility_errors() {
        let c = sample();
        assert!(matches!(c.counter("nope"), Err(CliError::Compatibility(_))));
        assert!(matches!(c.matrix("x"), Err(CliError::Compatibility(_))));
        let mut short = [0.0; 3];
        assert!(matches!(
            c.fill("m", &mut short),
            Err(CliError::Compatibility(_))
        ));
    }
}
