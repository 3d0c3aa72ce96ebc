use rand::Rng as _;

use super::*;
use crate::cca::ClassifierConfig;
use crate::rng;

/// Images in `[0,1]^36` built from one of four class templates plus a
/// class-independent stroke-width style and noise.
fn toy_images(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    toy_images_with(n, seed, 4)
}

fn toy_images_with(n: usize, seed: u64, classes: usize) -> (Matrix, Vec<usize>) {
    let mut r = rng::stream(seed, 55);
    let mut t = rng::stream(0, 56);
    let templates: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..36).map(|_| t.random_range(0.0..1.0)).collect())
        .collect();
    let style: Vec<f64> = (0..36)
        .map(|i| if i % 6 < 3 { 1.0 } else { -1.0 })
        .collect();
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
    let x = Matrix::from_fn(n, 36, |_, _| 0.0);
    let mut x = x;
    for i in 0..n {
        let s: f64 = r.random_range(-0.2..0.2);
        for j in 0..36 {
            let v = 0.6 * templates[labels[i]][j]
                + s * style[j]
                + 0.2
                + 0.02 * r.random_range(-1.0..1.0);
            x.set(i, j, v.clamp(0.0, 1.0));
        }
    }
    (x, labels)
}

fn toy_config(variant: DecorrVariant, lambda1: f64, lambda2: f64) -> FaeConfig {
    FaeConfig {
        input_dim: 36,
        hidden: vec![24],
        p: 4,
        q: 3,
        lambda1,
        lambda2,
        variant,
        lr: 0.05,
        batch_size: 50,
        epochs: 5,
        ..FaeConfig::default()
    }
}

#[test]
fn plain_autoencoder_reconstruction_decreases() {
    let (x, labels) = toy_images(1000, 1);
    for seed in 0..3 {
        let cfg = FaeConfig {
            seed,
            ..toy_config(DecorrVariant::None, 0.0, 0.0)
        };
        let log = FaeTrainer::new(cfg).unwrap().run(&x, &labels).unwrap();
        assert_eq!(log.len(), 5);
        assert!(log.windows(2).all(|w| w[1].rec < w[0].rec), "{log:?}");
    }
}

#[test]
fn decoding_the_code_matches_the_training_pass() {
    let (x, labels) = toy_images(20, 2);
    let mut model = FaeModel::new(&toy_config(DecorrVariant::Sdl, 1.0, 1.0)).unwrap();
    let code = model
        .encoder
        .forward(&x, crate::nn::Mode::Train)
        .unwrap()
        .output;
    let out = model
        .decoder
        .forward(&code, crate::nn::Mode::Train)
        .unwrap()
        .output;
    assert_eq!(model.encode(&x).unwrap(), code);
    assert_eq!(model.decode(&code).unwrap(), out);
    assert_eq!(model.reconstruct(&x).unwrap(), out);
    let _ = labels;
}

/// Mean absolute off-diagonal correlation of the decorrelation input over
/// all of `x`, and the same restricted to the y-z block.
fn code_correlations(model: &FaeModel, x: &Matrix) -> (f64, f64) {
    let (p, k) = (model.p, model.code_dim());
    let view = decorr_view(&model.encode(x).unwrap(), p);
    let c = crate::decorr::centered_minibatch_cov(&view).unwrap();
    let sd: Vec<f64> = c.diag().iter().map(|v| v.sqrt()).collect();
    let corr = Matrix::from_fn(k, k, |i, j| c.get(i, j) / (sd[i] * sd[j]));
    let cross: f64 = (0..p)
        .map(|i| corr.row(i)[p..].iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    (
        crate::decorr::mean_abs_off_diagonal(&corr),
        cross / (p * (k - p)) as f64,
    )
}

#[test]
fn decorrelation_shrinks_code_covariance() {
    let (x, labels) = toy_images_with(2000, 3, 10);
    let run = |variant, lambda2| {
        let cfg = FaeConfig {
            epochs: 8,
            lr: 0.1,
            p: 10,
            ..toy_config(variant, 1.0, lambda2)
        };
        let mut t = FaeTrainer::new(cfg).unwrap();
        t.run(&x, &labels).unwrap();
        code_correlations(&t.model, &x)
    };
    let (plain_all, plain_cross) = run(DecorrVariant::None, 0.0);
    let (sdl_all, sdl_cross) = run(DecorrVariant::Sdl, 0.3);
    assert!(sdl_all < 0.7 * plain_all, "{plain_all} -> {sdl_all}");
    assert!(
        sdl_cross < 0.5 * plain_cross,
        "{plain_cross} -> {sdl_cross}"
    );
}

#[test]
fn label_free_z_is_at_chance() {
    let (x, labels) = toy_images(2000, 4);
    let model = FaeModel::new(&toy_config(DecorrVariant::Sdl, 1.0, 1.0)).unwrap();
    let mut r = rng::stream(9, 0);
    let noise = Matrix::from_fn(2000, 3, |_, _| r.random_range(-1.0..1.0));
    let (tr, te) = (
        noise.select_rows(&(0..1000).collect::<Vec<_>>()),
        noise.select_rows(&(1000..2000).collect::<Vec<_>>()),
    );
    let clf =
        crate::cca::SoftmaxClassifier::fit(&tr, &labels[..1000], 4, &ClassifierConfig::default())
            .unwrap();
    let acc = clf.accuracy(&te, &labels[1000..]).unwrap();
    assert!((acc - 25.0).abs() < 5.0, "{acc}");
    let _ = (x, model);
}

#[test]
fn disentanglement_after_training() {
    let (x, labels) = toy_images(1500, 5);
    let (tr, te): (Vec<usize>, Vec<usize>) = ((0..1000).collect(), (1000..1500).collect());
    let cfg = FaeConfig {
        epochs: 10,
        ..toy_config(DecorrVariant::Sdl, 1.0, 1.0)
    };
    let mut t = FaeTrainer::new(cfg).unwrap();
    let (xtr, ltr) = (
        x.select_rows(&tr),
        tr.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
    );
    let (xte, lte) = (
        x.select_rows(&te),
        te.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
    );
    t.run(&xtr, &ltr).unwrap();
    let d = disentanglement_eval(
        &t.model,
        &xtr,
        &ltr,
        &xte,
        &lte,
        &ClassifierConfig::default(),
    )
    .unwrap();
    assert!(d.acc_y > 95.0, "{d:?}");
    assert!((0.0..=100.0).contains(&d.acc_z));
}

#[test]
fn style_transfer_contract() {
    let (x, labels) = toy_images(200, 6);
    let mut t = FaeTrainer::new(toy_config(DecorrVariant::Sdl, 1.0, 1.0)).unwrap();
    t.run(&x, &labels).unwrap();
    let scale = y_scale(&t.model, &x).unwrap();
    assert!(scale > 0.0);
    let out = style_transfer(&t.model, &x.select_rows(&[0, 1]), 2, scale).unwrap();
    assert_eq!(out.shape(), (2, 36));
    assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(matches!(
        style_transfer(&t.model, &x, 4, scale),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn style_sheet_is_a_grid_pgm() {
    let (x, labels) = toy_images(100, 7);
    let mut t = FaeTrainer::new(FaeConfig {
        epochs: 1,
        ..toy_config(DecorrVariant::Sdl, 1.0, 1.0)
    })
    .unwrap();
    t.run(&x, &labels).unwrap();
    let sheet = style_sheet(&t.model, &x.select_rows(&[0, 1, 2]), 6, 1.0).unwrap();
    assert_eq!((sheet.width, sheet.height), (24, 18));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.pgm");
    write_pgm(&p, &sheet).unwrap();
    let raw = std::fs::read(&p).unwrap();
    let header = b"P5\n24 18\n255\n";
    assert_eq!(&raw[..header.len()], header);
    assert_eq!(&raw[header.len()..], &sheet.pixels[..]);
    assert!(style_sheet(&t.model, &x, 5, 1.0).is_err());
}

#[test]
fn variants_share_everything_but_the_decorrelation_term() {
    let (x, labels) = toy_images(50, 8);
    let x = x.select_rows(&(0..10).collect::<Vec<_>>());
    let labels = &labels[..10];
    let mut base = FaeModel::new(&toy_config(DecorrVariant::None, 1.0, 1.0)).unwrap();
    let s0 = base.objective_step(&x, labels).unwrap();
    assert_eq!(s0.decorr, 0.0);
    for v in [
        DecorrVariant::Sdl,
        DecorrVariant::XCov,
        DecorrVariant::DeCov,
    ] {
        let mut m = FaeModel::new(&toy_config(v, 1.0, 1.0)).unwrap();
        assert_eq!(m.params_flat(), base.params_flat());
        let s = m.objective_step(&x, labels).unwrap();
        assert_eq!(s.rec, s0.rec);
        assert_eq!(s.cla, s0.cla);
        assert!(s.decorr > 0.0, "{v}");
        assert_eq!(s.total, s.rec + s.cla + s.decorr);
    }
}

#[test]
fn xcov_term_vanishes_for_batch_orthogonal_codes() {
    let mut m = FaeModel::new(&toy_config(DecorrVariant::XCov, 1.0, 1.0)).unwrap();
    // y depends on rows {0,1} vs {2,3}; z varies only within each pair
    let code = Matrix::from_rows(&[
        [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, -1.0, -2.0, 0.0],
        [-1.0, -1.0, -1.0, -1.0, 1.0, 2.0, 0.0],
        [-1.0, -1.0, -1.0, -1.0, -1.0, -2.0, 0.0],
    ]);
    let bn = m
        .code_bn
        .forward(&code, crate::nn::Mode::Train)
        .unwrap()
        .output;
    let (l, g) = m.decorr.loss_grad(&bn).unwrap();
    assert!(l < 1e-20, "{l}");
    assert!(g.max_abs() < 1e-12);
}

#[test]
fn fae_training_is_deterministic_and_resumable() {
    let (x, labels) = toy_images(230, 9);
    let cfg = FaeConfig {
        epochs: 3,
        ..toy_config(DecorrVariant::Sdl, 1.0, 1.0)
    };
    let mut a = FaeTrainer::new(cfg.clone()).unwrap();
    let la = a.run(&x, &labels).unwrap();
    let mut b = FaeTrainer::new(cfg).unwrap();
    let mut lb = Vec::new();
    for _ in 0..7 {
        lb.extend(b.train_step(&x, &labels).unwrap());
    }
    let mut c = b.clone();
    lb.extend(c.run(&x, &labels).unwrap());
    assert_eq!(la, lb);
    assert_eq!(a.model, c.model);
}

#[test]
fn bad_labels_rejected() {
    let (x, _) = toy_images(100, 10);
    let mut t = FaeTrainer::new(toy_config(DecorrVariant::Sdl, 1.0, 1.0)).unwrap();
    assert!(t.train_step(&x, &[7; 100]).is_err());
    assert!(t.train_step(&x, &[0; 99]).is_err());
}
