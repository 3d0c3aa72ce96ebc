//! Per-epoch metric CSVs and their checkpoint encoding.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! parsed value is bit-identical to the one written.

use std::path::Path;

use softcca_core::cca::EpochMetrics;
use softcca_core::fae::FaeEpochMetrics;

use crate::checkpoint::Checkpoint;
use crate::error::{CliError, Result};

pub const CCA_HEADER: [&str; 6] = [
    "epoch",
    "dist_loss",
    "sdl1",
    "sdl2",
    "total",
    "corr_strength_heldout",
];
pub const FAE_HEADER: [&str; 6] = ["epoch", "rec", "cla", "decorr", "total", "code_offdiag"];

const HISTORY: &str = "metrics.history";

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        msg: e.to_string().replace('\n', " "),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let got = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(csv_err(
            path,
            format!("unexpected header {:?}", got.iter().collect::<Vec<_>>()),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_err(path, e)))
        .collect()
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| csv_err(path, format!("{s:?} is not a number")))
}

fn parse_u64(path: &Path, s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| csv_err(path, format!("{s:?} is not an integer")))
}

pub fn write_cca_csv(path: &Path, log: &[EpochMetrics]) -> Result<()> {
    write_rows(
        path,
        &CCA_HEADER,
        log.iter().map(|m| {
            vec![
                m.epoch.to_string(),
                m.dist_loss.to_string(),
                m.sdl1.to_string(),
                m.sdl2.to_string(),
                m.total.to_string(),
                m.corr_strength_heldout
                    .map_or(String::new(), |v| v.to_string()),
            ]
        }),
    )
}

pub fn read_cca_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    read_rows(path, &CCA_HEADER)?
        .iter()
        .map(|r| {
            let heldout = &r[5];
            Ok(EpochMetrics {
                epoch: parse_u64(path, &r[0])?,
                dist_loss: parse_f64(path, &r[1])?,
                sdl1: parse_f64(path, &r[2])?,
                sdl2: parse_f64(path, &r[3])?,
                total: parse_f64(path, &r[4])?,
                corr_strength_heldout: if heldout.is_empty() {
                    None
                } else {
                    Some(parse_f64(path, heldout)?)
                },
            })
        })
        .collect()
}

pub fn write_fae_csv(path: &Path, log: &[FaeEpochMetrics]) -> Result<()> {
    write_rows(
        path,
        &FAE_HEADER,
        log.iter().map(|m| {
            vec![
                m.epoch.to_string(),
                m.rec.to_string(),
                m.cla.to_string(),
                m.decorr.to_string(),
                m.total.to_string(),
                m.code_offdiag.to_string(),
            ]
        }),
    )
}

pub fn read_fae_csv(path: &Path) -> Result<Vec<FaeEpochMetrics>> {
    read_rows(path, &FAE_HEADER)?
        .iter()
        .map(|r| {
            Ok(FaeEpochMetrics {
                epoch: parse_u64(path, &r[0])?,
                rec: parse_f64(path, &r[1])?,
                cla: parse_f64(path, &r[2])?,
                decorr: parse_f64(path, &r[3])?,
                total: parse_f64(path, &r[4])?,
                code_offdiag: parse_f64(path, &r[5])?,
            })
        })
        .collect()
}

/// A `label,value` report.
pub fn write_report(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    write_rows(
        path,
        &["label", "value"],
        rows.iter().map(|(l, v)| vec![l.clone(), v.to_string()]),
    )
}

pub fn read_report(path: &Path) -> Result<Vec<(String, f64)>> {
    read_rows(path, &["label", "value"])?
        .iter()
        .map(|r| Ok((r[0].to_string(), parse_f64(path, &r[1])?)))
        .collect()
}

pub fn push_cca_history(ck: &mut Checkpoint, log: &[EpochMetrics]) {
    let data = log
        .iter()
        .flat_map(|m| {
            [
                m.epoch as f64,
                m.dist_loss,
                m.sdl1,
                m.sdl2,
                m.total,
                m.corr_strength_heldout.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    ck.push_tensor(HISTORY, vec![log.len(), 6], data);
}

pub fn cca_history(ck: &Checkpoint) -> Result<Vec<EpochMetrics>> {
    let m = ck.matrix(HISTORY)?;
    Ok((0..m.rows())
        .map(|i| {
            let r = m.row(i);
            EpochMetrics {
                epoch: r[0] as u64,
                dist_loss: r[1],
                sdl1: r[2],
                sdl2: r[3],
                total: r[4],
                corr_strength_heldout: (!r[5].is_nan()).then_some(r[5]),
            }
        })
        .collect())
}

pub fn push_fae_history(ck: &mut Checkpoint, log: &[FaeEpochMetrics]) {
    let data = log
        .iter()
        .flat_map(|m| {
            [
                m.epoch as f64,
                m.rec,
                m.cla,
                m.decorr,
                m.total,
                m.code_offdiag,
            ]
        })
        .collect();
    ck.push_tensor(HISTORY, vec![log.len(), 6], data);
}

pub fn fae_history(ck: &Checkpoint) -> Result<Vec<FaeEpochMetrics>> {
    let m = ck.matrix(HISTORY)?;
    Ok((0..m.rows())
        .map(|i| {
            let r = m.row(i);
            FaeEpochMetrics {
                epoch: r[0] as u64,
                rec: r[1],
                cla: r[2],
                decorr: r[3],
                total: r[4],
                code_offdiag: r[5],
            }
        })
        .collect())
}
