//! The subcommands as library functions. The binary parses flags and calls
//! these; tests call them directly.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use softcca_core::cca::{correlation_strength, cross_view_eval, EpochMetrics};
use softcca_core::fae::{
    disentanglement_eval, style_sheet as render_sheet, write_pgm, y_scale, FaeEpochMetrics,
};
use softcca_core::gradcheck::{self, CheckResult};
use softcca_core::{FaeTrainer, Matrix, SoftCcaTrainer};

use crate::bench::{self, BenchReport};
use crate::checkpoint::Checkpoint;
use crate::config::{DataConfig, ExperimentConfig};
use crate::data::{load_images, load_paired, PairedData};
use crate::error::{CliError, Result};
use crate::metrics;

pub const CCA_KIND: &str = "soft_cca";
pub const FAE_KIND: &str = "fae";
pub const FINAL_CHECKPOINT: &str = "checkpoint.bin";
pub const METRICS_CSV: &str = "metrics.csv";

pub fn step_checkpoint_name(step: u64) -> String {
    format!("checkpoint-step{step}.bin")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// The configuration stored in checkpoints: a resumed run always trains to
/// completion.
fn snapshot(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.training.halt_after_steps = None;
    c.to_toml()
}

fn snapshot_config(ck: &Checkpoint, path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(&ck.config, &path.join("<config snapshot>"))
}

// ---------------------------------------------------------------- Soft CCA

/// A Soft CCA training run, finished or halted.
pub struct CcaRun {
    pub config: ExperimentConfig,
    pub trainer: SoftCcaTrainer,
    pub log: Vec<EpochMetrics>,
    pub data: PairedData,
}

pub fn cca_checkpoint(
    cfg: &ExperimentConfig,
    tr: &SoftCcaTrainer,
    log: &[EpochMetrics],
) -> Checkpoint {
    let mut ck = Checkpoint::new(CCA_KIND, snapshot(cfg));
    let (d1, d2) = tr.model.input_dims();
    ck.push_counter("d1", d1 as u64);
    ck.push_counter("d2", d2 as u64);
    ck.push_counter("epoch", tr.epoch);
    ck.push_counter("batch", tr.batch as u64);
    ck.push_counter("step", tr.step);
    ck.push_model("branch1", &tr.model.branch1);
    ck.push_model("branch2", &tr.model.branch2);
    ck.push_optimizer("opt1", &tr.opt1);
    ck.push_optimizer("opt2", &tr.opt2);
    ck.push_decorrelator("decorr1", &tr.model.decorr1);
    ck.push_decorrelator("decorr2", &tr.model.decorr2);
    let a = &tr.accum;
    ck.push_counter("accum.batches", a.batches);
    ck.push_tensor(
        "accum.sums",
        vec![4],
        vec![a.dist, a.decorr1, a.decorr2, a.total],
    );
    metrics::push_cca_history(&mut ck, log);
    ck
}

/// Rebuilds the configuration, trainer and metric history of a Soft CCA
/// checkpoint.
pub fn restore_cca(path: &Path) -> Result<(ExperimentConfig, SoftCcaTrainer, Vec<EpochMetrics>)> {
    let ck = Checkpoint::load(path)?;
    ck.expect_kind(CCA_KIND)?;
    let cfg = snapshot_config(&ck, path)?;
    let (d1, d2) = (ck.counter("d1")? as usize, ck.counter("d2")? as usize);
    let mut tr = SoftCcaTrainer::new(cfg.soft_cca_config()?, d1, d2)?;
    tr.epoch = ck.counter("epoch")?;
    tr.batch = ck.counter("batch")? as usize;
    tr.step = ck.counter("step")?;
    ck.restore_model("branch1", &mut tr.model.branch1)?;
    ck.restore_model("branch2", &mut tr.model.branch2)?;
    ck.restore_optimizer("opt1", &mut tr.opt1)?;
    ck.restore_optimizer("opt2", &mut tr.opt2)?;
    ck.restore_decorrelator("decorr1", &mut tr.model.decorr1)?;
    ck.restore_decorrelator("decorr2", &mut tr.model.decorr2)?;
    tr.accum.batches = ck.counter("accum.batches")?;
    let mut sums = [0.0; 4];
    ck.fill("accum.sums", &mut sums)?;
    [
        tr.accum.dist,
        tr.accum.decorr1,
        tr.accum.decorr2,
        tr.accum.total,
    ] = sums;
    let log = metrics::cca_history(&ck)?;
    Ok((cfg, tr, log))
}

pub fn train_cca(cfg: &ExperimentConfig, out: &Path, progress: impl FnMut(&str)) -> Result<CcaRun> {
    let data = load_paired(&cfg.data)?;
    let (d1, d2) = data.train.dims();
    let trainer = SoftCcaTrainer::new(cfg.soft_cca_config()?, d1, d2)?;
    drive_cca(cfg.clone(), trainer, Vec::new(), data, out, progress)
}

pub fn resume_cca(checkpoint: &Path, out: &Path, progress: impl FnMut(&str)) -> Result<CcaRun> {
    let (cfg, trainer, log) = restore_cca(checkpoint)?;
    let data = load_paired(&cfg.data)?;
    if data.train.dims() != trainer.model.input_dims() {
        return Err(CliError::Compatibility(format!(
            "checkpoint expects views of width {:?}, data has {:?}",
            trainer.model.input_dims(),
            data.train.dims()
        )));
    }
    drive_cca(cfg, trainer, log, data, out, progress)
}

fn drive_cca(
    cfg: ExperimentConfig,
    mut trainer: SoftCcaTrainer,
    mut log: Vec<EpochMetrics>,
    data: PairedData,
    out: &Path,
    mut progress: impl FnMut(&str),
) -> Result<CcaRun> {
    create_dir(out)?;
    let t = &cfg.training;
    while !trainer.is_done() {
        if t.halt_after_steps.is_some_and(|h| trainer.step >= h) {
            break;
        }
        if let Some(mut m) = trainer.train_step(&data.train)? {
            if cfg.eval.heldout_correlation {
                m.corr_strength_heldout = Some(trainer.heldout_correlation(&data.heldout)?);
            }
            progress(&format!(
                "epoch {} dist {:.6} sdl1 {:.4} sdl2 {:.4} total {:.6}{}",
                m.epoch,
                m.dist_loss,
                m.sdl1,
                m.sdl2,
                m.total,
                m.corr_strength_heldout
                    .map_or(String::new(), |c| format!(" heldout_corr {c:.3}"))
            ));
            log.push(m);
            metrics::write_cca_csv(&out.join(METRICS_CSV), &log)?;
        }
        if t.checkpoint_every > 0 && trainer.step % t.checkpoint_every == 0 {
            cca_checkpoint(&cfg, &trainer, &log)
                .save(&out.join(step_checkpoint_name(trainer.step)))?;
        }
    }
    metrics::write_cca_csv(&out.join(METRICS_CSV), &log)?;
    cca_checkpoint(&cfg, &trainer, &log).save(&out.join(FINAL_CHECKPOINT))?;
    Ok(CcaRun {
        config: cfg,
        trainer,
        log,
        data,
    })
}

// --------------------------------------------------------------------- FAE

pub struct FaeRun {
    pub config: ExperimentConfig,
    pub trainer: FaeTrainer,
    pub log: Vec<FaeEpochMetrics>,
}

pub fn fae_checkpoint(
    cfg: &ExperimentConfig,
    tr: &FaeTrainer,
    log: &[FaeEpochMetrics],
) -> Checkpoint {
    let mut ck = Checkpoint::new(FAE_KIND, snapshot(cfg));
    ck.push_counter("input_dim", tr.config.input_dim as u64);
    ck.push_counter("epoch", tr.epoch);
    ck.push_counter("batch", tr.batch as u64);
    ck.push_counter("step", tr.step);
    ck.push_model("encoder", &tr.model.encoder);
    ck.push_model("decoder", &tr.model.decoder);
    ck.push_model("code_bn", &tr.model.code_bn);
    ck.push_optimizer("opt_encoder", &tr.opt_encoder);
    ck.push_optimizer("opt_decoder", &tr.opt_decoder);
    ck.push_optimizer("opt_code_bn", &tr.opt_code_bn);
    ck.push_decorrelator("decorr", &tr.model.decorr);
    let a = &tr.accum;
    ck.push_counter("accum.batches", a.batches);
    ck.push_tensor(
        "accum.sums",
        vec![5],
        vec![a.rec, a.cla, a.decorr, a.total, a.offdiag],
    );
    metrics::push_fae_history(&mut ck, log);
    ck
}

pub fn restore_fae(path: &Path) -> Result<(ExperimentConfig, FaeTrainer, Vec<FaeEpochMetrics>)> {
    let ck = Checkpoint::load(path)?;
    ck.expect_kind(FAE_KIND)?;
    let cfg = snapshot_config(&ck, path)?;
    let mut tr = FaeTrainer::new(cfg.fae_config(ck.counter("input_dim")? as usize)?)?;
    tr.epoch = ck.counter("epoch")?;
    tr.batch = ck.counter("batch")? as usize;
    tr.step = ck.counter("step")?;
    ck.restore_model("encoder", &mut tr.model.encoder)?;
    ck.restore_model("decoder", &mut tr.model.decoder)?;
    ck.restore_model("code_bn", &mut tr.model.code_bn)?;
    ck.restore_optimizer("opt_encoder", &mut tr.opt_encoder)?;
    ck.restore_optimizer("opt_decoder", &mut tr.opt_decoder)?;
    ck.restore_optimizer("opt_code_bn", &mut tr.opt_code_bn)?;
    ck.restore_decorrelator("decorr", &mut tr.model.decorr)?;
    tr.accum.batches = ck.counter("accum.batches")?;
    let mut sums = [0.0; 5];
    ck.fill("accum.sums", &mut sums)?;
    [
        tr.accum.rec,
        tr.accum.cla,
        tr.accum.decorr,
        tr.accum.total,
        tr.accum.offdiag,
    ] = sums;
    let log = metrics::fae_history(&ck)?;
    Ok((cfg, tr, log))
}

/// Training images and labels for FAE runs.
fn fae_inputs(cfg: &ExperimentConfig) -> Result<(Matrix, Vec<usize>)> {
    let img = load_images(&cfg.data)?;
    Ok((img.train_x, img.train_labels))
}

pub fn train_fae(cfg: &ExperimentConfig, out: &Path, progress: impl FnMut(&str)) -> Result<FaeRun> {
    let (x, labels) = fae_inputs(cfg)?;
    let trainer = FaeTrainer::new(cfg.fae_config(x.cols())?)?;
    drive_fae(cfg.clone(), trainer, Vec::new(), &x, &labels, out, progress)
}

/// FAE training on caller-supplied images.
pub fn train_fae_on(
    cfg: &ExperimentConfig,
    x: &Matrix,
    labels: &[usize],
    out: &Path,
    progress: impl FnMut(&str),
) -> Result<FaeRun> {
    let trainer = FaeTrainer::new(cfg.fae_config(x.cols())?)?;
    drive_fae(cfg.clone(), trainer, Vec::new(), x, labels, out, progress)
}

pub fn resume_fae(checkpoint: &Path, out: &Path, progress: impl FnMut(&str)) -> Result<FaeRun> {
    let (cfg, trainer, log) = restore_fae(checkpoint)?;
    let (x, labels) = fae_inputs(&cfg)?;
    if x.cols() != trainer.config.input_dim {
        return Err(CliError::Compatibility(format!(
            "checkpoint expects {} pixels per image, data has {}",
            trainer.config.input_dim,
            x.cols()
        )));
    }
    drive_fae(cfg, trainer, log, &x, &labels, out, progress)
}

/// Resumes an FAE checkpoint on caller-supplied images.
pub fn resume_fae_on(
    checkpoint: &Path,
    x: &Matrix,
    labels: &[usize],
    out: &Path,
    progress: impl FnMut(&str),
) -> Result<FaeRun> {
    let (cfg, trainer, log) = restore_fae(checkpoint)?;
    drive_fae(cfg, trainer, log, x, labels, out, progress)
}

fn drive_fae(
    cfg: ExperimentConfig,
    mut trainer: FaeTrainer,
    mut log: Vec<FaeEpochMetrics>,
    x: &Matrix,
    labels: &[usize],
    out: &Path,
    mut progress: impl FnMut(&str),
) -> Result<FaeRun> {
    create_dir(out)?;
    let t = &cfg.training;
    while !trainer.is_done() {
        if t.halt_after_steps.is_some_and(|h| trainer.step >= h) {
            break;
        }
        if let Some(m) = trainer.train_step(x, labels)? {
            progress(&format!(
                "epoch {} rec {:.6} cla {:.6} decorr {:.4} total {:.6} code_offdiag {:.4}",
                m.epoch, m.rec, m.cla, m.decorr, m.total, m.code_offdiag
            ));
            log.push(m);
            metrics::write_fae_csv(&out.join(METRICS_CSV), &log)?;
        }
        if t.checkpoint_every > 0 && trainer.step % t.checkpoint_every == 0 {
            fae_checkpoint(&cfg, &trainer, &log)
                .save(&out.join(step_checkpoint_name(trainer.step)))?;
        }
    }
    metrics::write_fae_csv(&out.join(METRICS_CSV), &log)?;
    fae_checkpoint(&cfg, &trainer, &log).save(&out.join(FINAL_CHECKPOINT))?;
    Ok(FaeRun {
        config: cfg,
        trainer,
        log,
    })
}

// -------------------------------------------------------------------- eval

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Correlation,
    CrossviewL2r,
    CrossviewR2l,
    Disentanglement,
}

impl EvalMode {
    pub const ALL: [EvalMode; 4] = [
        EvalMode::Correlation,
        EvalMode::CrossviewL2r,
        EvalMode::CrossviewR2l,
        EvalMode::Disentanglement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Correlation => "correlation",
            EvalMode::CrossviewL2r => "crossview_l2r",
            EvalMode::CrossviewR2l => "crossview_r2l",
            EvalMode::Disentanglement => "disentanglement",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        EvalMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown eval mode {s:?} (expected correlation, crossview_l2r, crossview_r2l or disentanglement)"
            ))
        })
    }
}

/// Peeks at a checkpoint's kind.
pub fn checkpoint_kind(path: &Path) -> Result<String> {
    Ok(Checkpoint::load(path)?.kind)
}

/// Evaluates a checkpoint on the held-out data described by `data` (the
/// checkpoint's own `[data]` section when `None`). Returns `label,value`
/// rows and writes them to `out/eval_<mode>.csv` when `out` is given.
pub fn eval(
    checkpoint: &Path,
    data: Option<&DataConfig>,
    mode: EvalMode,
    out: Option<&Path>,
) -> Result<Vec<(String, f64)>> {
    let rows = match checkpoint_kind(checkpoint)?.as_str() {
        CCA_KIND => {
            let (cfg, tr, _) = restore_cca(checkpoint)?;
            let data = load_paired(data.unwrap_or(&cfg.data))?;
            eval_cca(&cfg, &tr, &data, mode)?
        }
        FAE_KIND => {
            let (cfg, tr, _) = restore_fae(checkpoint)?;
            if mode != EvalMode::Disentanglement {
                return Err(CliError::Usage(format!(
                    "an FAE checkpoint supports only disentanglement, not {mode}"
                )));
            }
            let img = load_images(data.unwrap_or(&cfg.data))?;
            if img.train_x.cols() != tr.config.input_dim {
                return Err(CliError::Compatibility(format!(
                    "checkpoint expects {} pixels per image, data has {}",
                    tr.config.input_dim,
                    img.train_x.cols()
                )));
            }
            let d = disentanglement_eval(
                &tr.model,
                &img.train_x,
                &img.train_labels,
                &img.test_x,
                &img.test_labels,
                &cfg.classifier_config(),
            )?;
            vec![
                ("acc_y".to_string(), d.acc_y),
                ("acc_z".to_string(), d.acc_z),
            ]
        }
        other => {
            return Err(CliError::Compatibility(format!(
                "unknown checkpoint kind {other:?}"
            )))
        }
    };
    if let Some(dir) = out {
        create_dir(dir)?;
        metrics::write_report(&dir.join(format!("eval_{mode}.csv")), &rows)?;
    }
    Ok(rows)
}

pub fn eval_cca(
    cfg: &ExperimentConfig,
    tr: &SoftCcaTrainer,
    data: &PairedData,
    mode: EvalMode,
) -> Result<Vec<(String, f64)>> {
    let held = &data.heldout;
    if held.dims() != tr.model.input_dims() {
        return Err(CliError::Compatibility(format!(
            "checkpoint expects views of width {:?}, data has {:?}",
            tr.model.input_dims(),
            held.dims()
        )));
    }
    let z1 = tr.model.embed1(&held.view1)?;
    let z2 = tr.model.embed2(&held.view2)?;
    let crossview = |a: &Matrix, b: &Matrix| -> Result<Vec<(String, f64)>> {
        let labels = held.labels_or_err()?;
        let r = cross_view_eval(a, b, labels, cfg.eval.folds, &cfg.classifier_config())?;
        let mut rows: Vec<(String, f64)> = r
            .fold_accuracy
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("fold{i}"), v))
            .collect();
        rows.push(("mean".into(), r.mean));
        rows.push(("std".into(), r.std));
        Ok(rows)
    };
    match mode {
        EvalMode::Correlation => {
            let r = correlation_strength(&z1, &z2)?;
            let mut rows: Vec<(String, f64)> = r
                .per_dim
                .iter()
                .enumerate()
                .map(|(i, &v)| (format!("dim{i}"), v))
                .collect();
            rows.push(("total".into(), r.total));
            Ok(rows)
        }
        EvalMode::CrossviewL2r => crossview(&z1, &z2),
        EvalMode::CrossviewR2l => crossview(&z2, &z1),
        EvalMode::Disentanglement => Err(CliError::Usage(
            "disentanglement needs an FAE checkpoint".into(),
        )),
    }
}

// -------------------------------------------------------------- style sheet

/// Renders one row per source test image (the first of each class) and
/// one column per class. Returns the written path.
pub fn style_sheet(checkpoint: &Path, data: Option<&DataConfig>, out: &Path) -> Result<PathBuf> {
    let (cfg, tr, _) = restore_fae(checkpoint)?;
    let img = load_images(data.unwrap_or(&cfg.data))?;
    if img.test_x.cols() != tr.config.input_dim {
        return Err(CliError::Compatibility(format!(
            "checkpoint expects {} pixels per image, data has {}",
            tr.config.input_dim,
            img.test_x.cols()
        )));
    }
    let side = (tr.config.input_dim as f64).sqrt().round() as usize;
    let sources: Vec<usize> = (0..tr.model.p)
        .filter_map(|c| img.test_labels.iter().position(|&l| l == c))
        .collect();
    let scale = y_scale(&tr.model, &img.train_x)?;
    let sheet = render_sheet(&tr.model, &img.test_x.select_rows(&sources), side, scale)?;
    create_dir(out)?;
    let path = out.join("style_sheet.pgm");
    write_pgm(&path, &sheet)?;
    Ok(path)
}

// -------------------------------------------------------------------- misc

pub fn bench_decorr(
    cfg: &ExperimentConfig,
    out: &Path,
    mut progress: impl FnMut(&str),
) -> Result<BenchReport> {
    let report = bench::run(&cfg.bench, |t| {
        progress(&format!(
            "{} k={} median {:.3e} s ({} calls per sample)",
            t.method.name(),
            t.k,
            t.median_seconds,
            t.inner
        ))
    })?;
    create_dir(out)?;
    bench::write(out, &report)?;
    Ok(report)
}

pub fn gradcheck(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(gradcheck::run_suite(seed)?)
}
