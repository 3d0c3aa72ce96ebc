//! Wall-clock scaling benchmark: SDL update plus gradient against one exact
//! whitening step, over a list of embedding widths at a fixed batch size.

use std::path::Path;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use softcca_core::cca::exact_decorrelation_step;
use softcca_core::decorr::SdlState;
use softcca_core::linalg::center_columns;
use softcca_core::rng::{self, tags};
use softcca_core::Matrix;

use crate::config::BenchConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sdl,
    Exact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sdl => "sdl",
            Method::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub method: Method,
    pub k: usize,
    /// Median seconds per call over the timed samples.
    pub median_seconds: f64,
    /// Calls per timed sample.
    pub inner: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub timings: Vec<Timing>,
    pub sdl_slope: f64,
    pub exact_slope: f64,
}

impl BenchReport {
    pub fn median(&self, method: Method, k: usize) -> Option<f64> {
        self.timings
            .iter()
            .find(|t| t.method == method && t.k == k)
            .map(|t| t.median_seconds)
    }
}

pub fn validate(cfg: &BenchConfig) -> Result<()> {
    let ks = &cfg.k_list;
    if ks.len() < 4 {
        return Err(CliError::Usage(format!(
            "bench needs at least 4 widths, got {}",
            ks.len()
        )));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0 {
        return Err(CliError::Usage(
            "bench widths must be positive and strictly ascending".into(),
        ));
    }
    if ks[ks.len() - 1] < 8 * ks[0] {
        return Err(CliError::Usage(
            "bench widths must span at least an 8x range".into(),
        ));
    }
    if cfg.reps < 20 {
        return Err(CliError::Usage(format!(
            "bench needs at least 20 timed repetitions, got {}",
            cfg.reps
        )));
    }
    if cfg.m < 2 {
        return Err(CliError::Usage(
            "bench batch size must be at least 2".into(),
        ));
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median per-call time of `f`. Calls are grouped so one timed sample lasts
/// at least `min_sample_seconds`.
fn time_calls(cfg: &BenchConfig, mut f: impl FnMut() -> Result<()>) -> Result<(f64, usize)> {
    let mut inner = 1usize;
    loop {
        let t = Instant::now();
        for _ in 0..inner {
            f()?;
        }
        if t.elapsed().as_secs_f64() >= cfg.min_sample_seconds || inner >= 1 << 20 {
            break;
        }
        inner *= 2;
    }
    for _ in 0..cfg.warmup {
        for _ in 0..inner {
            f()?;
        }
    }
    let mut samples = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let t = Instant::now();
        for _ in 0..inner {
            f()?;
        }
        samples.push(t.elapsed().as_secs_f64() / inner as f64);
    }
    Ok((median(&mut samples), inner))
}

pub fn run(cfg: &BenchConfig, mut progress: impl FnMut(&Timing)) -> Result<BenchReport> {
    validate(cfg)?;
    let mut timings = Vec::new();
    let mut r = rng::stream(cfg.seed, tags::BENCH);
    for &k in &cfg.k_list {
        let (z, _) = center_columns(&Matrix::from_fn(cfg.m, k, |_, _| r.sample(StandardNormal)));
        let mut state = SdlState::new(k, cfg.alpha)?;
        let (med, inner) = time_calls(cfg, || {
            std::hint::black_box(state.loss_grad(&z)?);
            Ok(())
        })?;
        let t = Timing {
            method: Method::Sdl,
            k,
            median_seconds: med,
            inner,
        };
        progress(&t);
        timings.push(t);
        let (med, inner) = time_calls(cfg, || {
            std::hint::black_box(exact_decorrelation_step(&z, cfg.ridge)?);
            Ok(())
        })?;
        let t = Timing {
            method: Method::Exact,
            k,
            median_seconds: med,
            inner,
        };
        progress(&t);
        timings.push(t);
    }
    let ks: Vec<f64> = cfg.k_list.iter().map(|&k| k as f64).collect();
    let slope = |m: Method| {
        let y: Vec<f64> = timings
            .iter()
            .filter(|t| t.method == m)
            .map(|t| t.median_seconds)
            .collect();
        loglog_slope(&ks, &y)
    };
    Ok(BenchReport {
        sdl_slope: slope(Method::Sdl),
        exact_slope: slope(Method::Exact),
        timings,
    })
}

/// Writes `bench_decorr.csv` (one row per method and width) and
/// `bench_slopes.csv` into `dir`.
pub fn write(dir: &Path, report: &BenchReport) -> Result<()> {
    let path = dir.join("bench_decorr.csv");
    let err = |e: csv::Error| CliError::Csv {
        path: path.clone(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(["method", "k", "median_seconds", "inner_reps"])
        .map_err(err)?;
    for t in &report.timings {
        w.write_record([
            t.method.name().to_string(),
            t.k.to_string(),
            t.median_seconds.to_string(),
            t.inner.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let path = dir.join("bench_slopes.csv");
    let err = |e: csv::Error| CliError::Csv {
        path: path.clone(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(["method", "loglog_slope"]).map_err(err)?;
    w.write_record(["sdl".to_string(), report.sdl_slope.to_string()])
        .map_err(err)?;
    w.write_record(["exact".to_string(), report.exact_slope.to_string()])
        .map_err(err)?;
    w.flush().map_err(|e| CliError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
        assert!((loglog_slope(&x, &y) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn invalid_width_lists_rejected() {
        let ok = BenchConfig {
            k_list: vec![4, 8, 16, 32],
            ..Default::default()
        };
        assert!(validate(&ok).is_ok());
        for ks in [
            vec![4, 8, 16],
            vec![4, 8, 8, 32],
            vec![8, 9, 10, 11],
            vec![32, 16, 8, 4],
        ] {
            let c = BenchConfig {
                k_list: ks,
                ..ok.clone()
            };
            assert!(validate(&c).is_err());
        }
        let c = BenchConfig { reps: 5, ..ok };
        assert!(validate(&c).is_err());
    }

    #[test]
    fn tiny_run_reports_every_width() {
        let cfg = BenchConfig {
            k_list: vec![4, 8, 16, 32],
            m: 8,
            reps: 20,
            warmup: 0,
            min_sample_seconds: 1e-4,
            ..Default::default()
        };
        let rep = run(&cfg, |_| {}).unwrap();
        assert_eq!(rep.timings.len(), 8);
        assert!(rep
            .timings
            .iter()
            .all(|t| t.median_seconds > 0.0 && t.inner >= 1));
        assert!(rep.sdl_slope.is_finite() && rep.exact_slope.is_finite());
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), &rep).unwrap();
        let text = std::fs::read_to_string(dir.path().join("bench_decorr.csv")).unwrap();
        assert_eq!(text.lines().count(), 9);
    }
}
