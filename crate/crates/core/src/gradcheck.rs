//! Central finite-difference gradient checks.
//!
//! [`run_suite`] exercises every analytic gradient in the crate on small
//! random instances (`m ∈ {2, 8}`, widths ≤ 16) and reports the worst
//! elementwise relative error per check.

use rand::Rng as _;

use crate::cca::{self, SoftCcaConfig, SoftCcaModel};
use crate::decorr::{self, DecorrVariant, SdlState};
use crate::error::Result;
use crate::fae::{FaeConfig, FaeModel};
use crate::linalg::Matrix;
use crate::nn::{mlp_specs, LayerSpec, MlpModel, Mode};
use crate::rng::{self, Rng};

/// Step used by every check.
pub const STEP: f64 = 1e-5;
/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`
/// so entries that are zero up to rounding are judged on absolute error.
pub const FLOOR: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

/// Central differences of `f` at `x`. `x` is restored before returning.
pub fn numerical_gradient(x: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(x);
        x[i] = orig - h;
        let fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub entries: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn probe_loss(out: &Matrix, probe: &Matrix) -> f64 {
    out.data()
        .iter()
        .zip(probe.data())
        .map(|(a, b)| a * b)
        .sum()
}

/// Checks parameter and input gradients of `<probe, model(x)>`.
fn check_model(name: &str, model: &MlpModel, x: &Matrix, rng: &mut Rng) -> Result<CheckResult> {
    let mut work = model.clone();
    let trace = work.forward(x, Mode::Train)?;
    let probe = random_matrix(trace.output.rows(), trace.output.cols(), rng);
    let (grads, gx) = model.backward(&trace, &probe)?;

    let mut theta = model.params_flat();
    let mut m2 = model.clone();
    let num_p = numerical_gradient(&mut theta, STEP, |t| {
        m2.set_params_flat(t).unwrap();
        let tr = m2.forward(x, Mode::Train).unwrap();
        probe_loss(&tr.output, &probe)
    });
    let mut xin = x.data().to_vec();
    let mut m3 = model.clone();
    let num_x = numerical_gradient(&mut xin, STEP, |v| {
        let xm = Matrix::from_vec(x.rows(), x.cols(), v.to_vec()).unwrap();
        probe_loss(&m3.forward(&xm, Mode::Train).unwrap().output, &probe)
    });
    let err = max_relative_error(&grads.flat(), &num_p).max(max_relative_error(gx.data(), &num_x));
    Ok(CheckResult {
        name: name.to_string(),
        max_rel_err: err,
        entries: num_p.len() + num_x.len(),
    })
}

fn check_matrix_fn(
    name: &str,
    z: &Matrix,
    analytic: &Matrix,
    f: impl Fn(&Matrix) -> f64,
) -> CheckResult {
    let mut v = z.data().to_vec();
    let num = numerical_gradient(&mut v, STEP, |d| {
        f(&Matrix::from_vec(z.rows(), z.cols(), d.to_vec()).unwrap())
    });
    CheckResult {
        name: name.to_string(),
        max_rel_err: max_relative_error(analytic.data(), &num),
        entries: num.len(),
    }
}

/// An SDL state that has already absorbed a few batches, so the frozen
/// history term is non-trivial.
fn warmed_state(k: usize, alpha: f64, rng: &mut Rng) -> SdlState {
    let mut s = SdlState::new(k, alpha).unwrap();
    for _ in 0..3 {
        let z = random_matrix(6, k, rng);
        s.update(&z).unwrap();
    }
    s
}

pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = rng::stream(seed, 99);
    let mut out = Vec::new();

    for &m in &[2usize, 8] {
        let x = random_matrix(m, 5, &mut rng);
        let affine = MlpModel::init(
            &[LayerSpec::Affine {
                input: 5,
                output: 4,
            }],
            &mut rng,
        )?;
        out.push(check_model(
            &format!("nn.affine m={m}"),
            &affine,
            &x,
            &mut rng,
        )?);

        let relu = MlpModel::init(
            &[
                LayerSpec::Affine {
                    input: 5,
                    output: 7,
                },
                LayerSpec::Relu,
                LayerSpec::Affine {
                    input: 7,
                    output: 3,
                },
            ],
            &mut rng,
        )?;
        out.push(check_model(&format!("nn.relu m={m}"), &relu, &x, &mut rng)?);

        let mut bn = MlpModel::init(&[LayerSpec::BatchNorm { dim: 5 }], &mut rng)?;
        randomize_bn(&mut bn, &mut rng);
        out.push(check_model(
            &format!("nn.batchnorm m={m}"),
            &bn,
            &x,
            &mut rng,
        )?);

        let mut specs = mlp_specs(5, &[16, 8], 4);
        specs.push(LayerSpec::BatchNorm { dim: 4 });
        let mut net = MlpModel::init(&specs, &mut rng)?;
        randomize_bn(&mut net, &mut rng);
        out.push(check_model(
            &format!("nn.composed m={m}"),
            &net,
            &x,
            &mut rng,
        )?);
    }

    for &m in &[2usize, 8] {
        let k = 4;
        let z = random_matrix(m, k, &mut rng);

        let state = warmed_state(k, 0.9, &mut rng);
        let mut after = state.clone();
        let upd = after.update(&z)?;
        let g = after.gradient(&upd.c_appx, &z)?;
        out.push(check_matrix_fn(
            &format!("decorr.sdl m={m}"),
            &z,
            &g,
            |zz| state.preview(zz).unwrap().loss,
        ));

        for variant in [DecorrVariant::DeCov, DecorrVariant::DeCovL1] {
            let (_, g) = decorr::decov_loss_grad(&z, variant, None)?;
            out.push(check_matrix_fn(
                &format!("decorr.{} m={m}", variant.name()),
                &z,
                &g,
                |zz| decorr::decov_loss_grad(zz, variant, None).unwrap().0,
            ));
        }

        let state = warmed_state(k, 0.8, &mut rng);
        let mut after = state.clone();
        let (_, g) = decorr::decov_loss_grad(&z, DecorrVariant::DeCovGc, Some(&mut after))?;
        out.push(check_matrix_fn(
            &format!("decorr.decov_gc m={m}"),
            &z,
            &g,
            |zz| decorr::decov_gc_frozen_loss(&state, zz).unwrap(),
        ));

        let y = random_matrix(m, 3, &mut rng);
        let zc = random_matrix(m, 2, &mut rng);
        let (_, gy, gz) = decorr::xcov_loss_grad(&y, &zc)?;
        out.push(check_matrix_fn(
            &format!("decorr.xcov_y m={m}"),
            &y,
            &gy,
            |yy| decorr::xcov_loss_grad(yy, &zc).unwrap().0,
        ));
        out.push(check_matrix_fn(
            &format!("decorr.xcov_z m={m}"),
            &zc,
            &gz,
            |zz| decorr::xcov_loss_grad(&y, zz).unwrap().0,
        ));

        let z2 = random_matrix(m, k, &mut rng);
        let (_, g1, g2) = cca::l2_dist_loss(&z, &z2)?;
        out.push(check_matrix_fn(
            &format!("cca.l2_dist_z1 m={m}"),
            &z,
            &g1,
            |zz| cca::l2_dist_loss(zz, &z2).unwrap().0,
        ));
        out.push(check_matrix_fn(
            &format!("cca.l2_dist_z2 m={m}"),
            &z2,
            &g2,
            |zz| cca::l2_dist_loss(&z, zz).unwrap().0,
        ));
    }

    for &m in &[4usize, 8] {
        out.push(check_soft_cca_objective(m, &mut rng)?);
        out.push(check_fae_objective(m, DecorrVariant::Sdl, &mut rng)?);
    }
    out.push(check_fae_objective(8, DecorrVariant::XCov, &mut rng)?);
    Ok(out)
}

fn randomize_bn(model: &mut MlpModel, rng: &mut Rng) {
    for l in model.layers_mut() {
        if let crate::nn::Layer::BatchNorm(bn) = l {
            for g in &mut bn.gamma {
                *g = rng.random_range(0.5..1.5);
            }
            for b in &mut bn.beta {
                *b = rng.random_range(-0.5..0.5);
            }
        }
    }
}

/// Full Soft CCA objective (both branches, batch norm, SDL with frozen
/// history, L2 distance) on a d=6, k=3 instance.
fn check_soft_cca_objective(m: usize, rng: &mut Rng) -> Result<CheckResult> {
    let config = SoftCcaConfig {
        hidden: vec![5],
        k: 3,
        lambda: 0.7,
        alpha: 0.9,
        ..SoftCcaConfig::default()
    };
    let mut model = SoftCcaModel::new(&config, 6, 6)?;
    for b in [&mut model.branch1, &mut model.branch2] {
        randomize_bn(b, rng);
    }
    let x1 = random_matrix(m, 6, rng);
    let x2 = random_matrix(m, 6, rng);
    // Give the accumulators some history first.
    for _ in 0..2 {
        let a = random_matrix(m, 6, rng);
        let b = random_matrix(m, 6, rng);
        model.objective_step(&a, &b)?;
    }
    let frozen = model.clone();
    let mut work = model.clone();
    let step = work.objective_step(&x1, &x2)?;
    let analytic = [step.grads1.flat(), step.grads2.flat()].concat();

    let n1 = frozen.branch1.num_params();
    let mut theta = [frozen.branch1.params_flat(), frozen.branch2.params_flat()].concat();
    let num = numerical_gradient(&mut theta, STEP, |t| {
        let mut mm = frozen.clone();
        mm.branch1.set_params_flat(&t[..n1]).unwrap();
        mm.branch2.set_params_flat(&t[n1..]).unwrap();
        mm.objective_frozen(&x1, &x2).unwrap()
    });
    Ok(CheckResult {
        name: format!("cca.soft_cca_objective m={m}"),
        max_rel_err: max_relative_error(&analytic, &num),
        entries: num.len(),
    })
}

/// Full FAE objective (reconstruction, classification on y, decorrelation
/// on the batch-normalised code) on 16-pixel images with p = q = 2.
fn check_fae_objective(m: usize, variant: DecorrVariant, rng: &mut Rng) -> Result<CheckResult> {
    let config = FaeConfig {
        input_dim: 16,
        hidden: vec![8],
        p: 2,
        q: 2,
        lambda1: 0.8,
        lambda2: 0.6,
        variant,
        ..FaeConfig::default()
    };
    let mut model = FaeModel::new(&config)?;
    randomize_bn(&mut model.code_bn, rng);
    let x = Matrix::from_fn(m, 16, |_, _| rng.random_range(0.0..1.0));
    let labels: Vec<usize> = (0..m).map(|i| i % 2).collect();
    for _ in 0..2 {
        let xa = Matrix::from_fn(m, 16, |_, _| rng.random_range(0.0..1.0));
        model.objective_step(&xa, &labels)?;
    }
    let frozen = model.clone();
    let mut work = model.clone();
    let step = work.objective_step(&x, &labels)?;
    let analytic = step.flat_grads();

    let mut theta = frozen.params_flat();
    let num = numerical_gradient(&mut theta, STEP, |t| {
        let mut mm = frozen.clone();
        mm.set_params_flat(t).unwrap();
        mm.objective_frozen(&x, &labels).unwrap()
    });
    Ok(CheckResult {
        name: format!("fae.objective[{}] m={m}", variant.name()),
        max_rel_err: max_relative_error(&analytic, &num),
        entries: num.len(),
    })
}
