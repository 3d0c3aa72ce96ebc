use rand::Rng as _;
use rand_distr::StandardNormal;

use super::*;
use crate::data::{synth_correlated, PairedDataset, SynthSpec};
use crate::decorr::{mean_abs_off_diagonal, DecorrVariant};
use crate::gradcheck::{max_relative_error, numerical_gradient};
use crate::linalg::{center_columns, matmul_tn};
use crate::nn::Layer;
use crate::rng;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, 77);
    Matrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

fn cov(x: &Matrix) -> Matrix {
    let (c, _) = center_columns(x);
    matmul_tn(&c, &c)
        .unwrap()
        .scaled(1.0 / (x.rows() as f64 - 1.0))
}

#[test]
fn l2_dist_of_equal_views_is_zero() {
    let z = gaussian(5, 3, 1);
    let (l, g1, g2) = l2_dist_loss(&z, &z).unwrap();
    assert_eq!(l, 0.0);
    assert_eq!(g1.max_abs() + g2.max_abs(), 0.0);
}

#[test]
fn l2_dist_single_row_by_hand() {
    let z1 = Matrix::from_rows(&[[3.0, 1.0]]);
    let z2 = Matrix::from_rows(&[[1.0, 1.0]]);
    let (l, g1, g2) = l2_dist_loss(&z1, &z2).unwrap();
    assert_eq!(l, 2.0);
    assert_eq!(g1, Matrix::from_rows(&[[2.0, 0.0]]));
    assert_eq!(g2, Matrix::from_rows(&[[-2.0, 0.0]]));
}

#[test]
fn l2_dist_matches_fd() {
    let z1 = gaussian(6, 4, 2);
    let z2 = gaussian(6, 4, 3);
    let (_, g1, _) = l2_dist_loss(&z1, &z2).unwrap();
    let mut v = z1.data().to_vec();
    let num = numerical_gradient(&mut v, 1e-5, |d| {
        l2_dist_loss(&Matrix::from_vec(6, 4, d.to_vec()).unwrap(), &z2)
            .unwrap()
            .0
    });
    assert!(max_relative_error(g1.data(), &num) < 1e-6);
}

#[test]
fn l2_dist_shape_mismatch() {
    assert!(l2_dist_loss(&Matrix::zeros(2, 2), &Matrix::zeros(2, 3)).is_err());
}

#[test]
fn exact_decorrelation_whitens() {
    let z = gaussian(40, 6, 4);
    let w = exact_decorrelation_step(&z, 0.0).unwrap();
    let c = crate::decorr::minibatch_cov(&w).unwrap();
    assert!(c.sub(&Matrix::identity(6)).unwrap().max_abs() < 1e-5);
    let again = exact_decorrelation_step(&w, 0.0).unwrap();
    assert!(again.sub(&w).unwrap().max_abs() < 1e-6);
}

#[test]
fn exact_decorrelation_leaves_white_data() {
    let a = 3.0f64.sqrt() / 2.0;
    let z = Matrix::from_rows(&[[a, a], [a, -a], [-a, a], [-a, -a]]);
    let w = exact_decorrelation_step(&z, 0.0).unwrap();
    assert!(w.sub(&z).unwrap().max_abs() < 1e-9);
}

#[test]
fn exact_decorrelation_scalar() {
    let s = 2.0f64.sqrt();
    let z = Matrix::from_rows(&[[s], [-s]]);
    let w = exact_decorrelation_step(&z, 0.0).unwrap();
    let c = crate::decorr::minibatch_cov(&w).unwrap();
    assert!((c.get(0, 0) - 1.0).abs() < 1e-12);
}

#[test]
fn correlation_of_identical_embeddings_is_k() {
    let z = gaussian(100, 7, 5);
    let r = correlation_strength(&z, &z).unwrap();
    assert!((r.total - 7.0).abs() < 1e-12);
    assert_eq!(r.upper_bound, 7);
    let neg = correlation_strength(&z, &z.scaled(-1.0)).unwrap();
    assert!((neg.total + 7.0).abs() < 1e-12);
}

#[test]
fn correlation_null_is_small() {
    let r = correlation_strength(&gaussian(5000, 10, 6), &gaussian(5000, 10, 7)).unwrap();
    assert!(r.total.abs() < 0.5, "{}", r.total);
}

#[test]
fn degenerate_column_contributes_zero() {
    let mut z = gaussian(20, 2, 8);
    for r in 0..20 {
        z.set(r, 1, 1.0);
    }
    let rep = correlation_strength(&z, &z).unwrap();
    assert_eq!(rep.per_dim[1], 0.0);
    assert!((rep.total - 1.0).abs() < 1e-12);
}

#[test]
fn linear_cca_of_identical_views() {
    let x = gaussian(500, 4, 9);
    let m = linear_cca_fit(&x, &x, 4, 0.0).unwrap();
    for c in &m.canonical_correlations {
        assert!((c - 1.0).abs() < 1e-6, "{c}");
    }
}

#[test]
fn linear_cca_null() {
    let m = linear_cca_fit(
        &gaussian(10000, 5, 10),
        &gaussian(10000, 5, 11),
        5,
        DEFAULT_RIDGE,
    )
    .unwrap();
    assert!(
        m.canonical_correlations.iter().all(|&c| c < 0.05),
        "{:?}",
        m.canonical_correlations
    );
}

fn planted(n: usize, rho: Vec<f64>, seed: u64) -> (PairedDataset, Vec<f64>) {
    synth_correlated(&SynthSpec {
        n,
        d1: 8,
        d2: 6,
        rho,
        seed,
    })
    .unwrap()
}

#[test]
fn linear_cca_recovers_planted() {
    let (ds, truth) = planted(20000, vec![0.9, 0.5], 12);
    let m = linear_cca_fit(&ds.view1, &ds.view2, 2, DEFAULT_RIDGE).unwrap();
    for (c, t) in m.canonical_correlations.iter().zip(&truth) {
        assert!((c - t).abs() < 0.03, "{c} vs {t}");
    }
}

#[test]
fn linear_cca_noiseless() {
    let (ds, _) = planted(2000, vec![1.0, 1.0], 13);
    let m = linear_cca_fit(&ds.view1, &ds.view2, 2, 0.0).unwrap();
    for c in &m.canonical_correlations {
        assert!((c - 1.0).abs() < 1e-6, "{c}");
    }
}

#[test]
fn empirical_correlations_converge_with_n() {
    let truth = [0.8, 0.4];
    let err = |n: usize| {
        (0..5)
            .map(|s| {
                let (ds, _) = planted(n, truth.to_vec(), 100 + s);
                let m = linear_cca_fit(&ds.view1, &ds.view2, 2, 0.0).unwrap();
                m.canonical_correlations
                    .iter()
                    .zip(&truth)
                    .map(|(c, t)| (c - t).abs())
                    .sum::<f64>()
            })
            .sum::<f64>()
    };
    let (small, large) = (err(2000), err(20000));
    assert!(large < small, "{large} vs {small}");
    assert!(large / 10.0 < 0.02);
}

#[test]
fn linear_cca_projections_are_white_and_paired() {
    let (ds, _) = planted(3000, vec![0.9, 0.6], 14);
    let m = linear_cca_fit(&ds.view1, &ds.view2, 3, DEFAULT_RIDGE).unwrap();
    let z1 = m.transform1(&ds.view1).unwrap();
    let z2 = m.transform2(&ds.view2).unwrap();
    assert!(cov(&z1).sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-3);
    assert!(cov(&z2).sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-3);
    let rep = correlation_strength(&z1, &z2).unwrap();
    for (p, c) in rep.per_dim.iter().zip(&m.canonical_correlations) {
        assert!((p - c).abs() < 1e-3, "{p} vs {c}");
    }
    let w = &m.canonical_correlations;
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
}

#[test]
fn linear_cca_rejects_large_k() {
    let x = gaussian(10, 3, 15);
    assert!(matches!(
        linear_cca_fit(&x, &x, 4, 0.0),
        Err(crate::Error::Config(_))
    ));
    assert!(matches!(
        linear_cca_fit(&x, &x, 0, 0.0),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn classifier_separates_two_blobs() {
    let x = Matrix::from_fn(40, 2, |r, c| {
        if r < 20 {
            1.0 + c as f64
        } else {
            -1.0 - c as f64
        }
    });
    let labels: Vec<usize> = (0..40).map(|r| usize::from(r >= 20)).collect();
    let clf = SoftmaxClassifier::fit(&x, &labels, 2, &ClassifierConfig::default()).unwrap();
    assert_eq!(clf.accuracy(&x, &labels).unwrap(), 100.0);
    let rep = cross_view_eval(&x, &x, &labels, 5, &ClassifierConfig::default()).unwrap();
    assert_eq!(rep.mean, 100.0);
    assert_eq!(rep.std, 0.0);
}

#[test]
fn shuffled_labels_give_chance() {
    let x = gaussian(5000, 10, 16);
    let mut r = rng::stream(17, 0);
    let labels: Vec<usize> = (0..5000).map(|_| r.random_range(0..10)).collect();
    let rep = cross_view_eval(&x, &x, &labels, 5, &ClassifierConfig::default()).unwrap();
    assert!((rep.mean - 10.0).abs() < 3.0, "{}", rep.mean);
}

#[test]
fn single_class_is_degenerate() {
    let x = gaussian(10, 2, 18);
    let err = SoftmaxClassifier::fit(&x, &[1; 10], 3, &ClassifierConfig::default()).unwrap_err();
    assert!(matches!(err, crate::Error::DegenerateLabels(_)));
}

fn linear_config(lambda: f64, k: usize) -> SoftCcaConfig {
    SoftCcaConfig {
        hidden: vec![],
        k,
        lambda,
        lr: 0.02,
        lr_decay: 0.8,
        batch_size: 100,
        epochs: 20,
        ..SoftCcaConfig::default()
    }
}

#[test]
fn zero_lambda_identical_views_stay_aligned() {
    let x = gaussian(400, 5, 19);
    let ds = PairedDataset::new(x.clone(), x, None, "same").unwrap();
    let cfg = SoftCcaConfig {
        hidden: vec![6],
        k: 3,
        lambda: 0.0,
        epochs: 3,
        ..SoftCcaConfig::default()
    };
    let mut model = SoftCcaModel::new(&cfg, 5, 5).unwrap();
    model.branch2 = model.branch1.clone();
    let mut t = SoftCcaTrainer::from_model(cfg, model).unwrap();
    let log = t.run(&ds, None).unwrap();
    assert!(log.iter().all(|m| m.dist_loss == 0.0 && m.total == 0.0));
    assert!(log.iter().all(|m| m.sdl1 > 0.0));
    assert_eq!(t.model.branch1, t.model.branch2);
}

#[test]
fn soft_cca_tracks_linear_oracle_on_small_problem() {
    let (ds, truth) = planted(5000, vec![0.9, 0.6], 20);
    let mut t = SoftCcaTrainer::new(linear_config(1.0, 2), 8, 6).unwrap();
    t.run(&ds, None).unwrap();
    let z1 = t.model.embed1(&ds.view1).unwrap();
    let z2 = t.model.embed2(&ds.view2).unwrap();
    let soft = correlation_strength(&z1, &z2).unwrap().total;
    let oracle: f64 = linear_cca_fit(&ds.view1, &ds.view2, 2, DEFAULT_RIDGE)
        .unwrap()
        .canonical_correlations
        .iter()
        .sum();
    assert!(soft > 0.95 * oracle, "{soft} vs {oracle}");
    assert!((oracle - truth.iter().sum::<f64>()).abs() < 0.05);
    for z in [&z1, &z2] {
        let off = mean_abs_off_diagonal(&cov(z));
        assert!(off < 0.05, "{off}");
    }
}

#[test]
fn training_is_deterministic() {
    let (ds, _) = planted(600, vec![0.8], 21);
    let run = || {
        let mut t = SoftCcaTrainer::new(linear_config(1.0, 2), 8, 6).unwrap();
        (t.run(&ds, Some(&ds)).unwrap(), t.model)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert!(a.iter().all(|m| m.corr_strength_heldout.is_some()));
}

#[test]
fn interrupted_run_matches_uninterrupted() {
    let (ds, _) = planted(650, vec![0.8], 22);
    let mut full = SoftCcaTrainer::new(linear_config(1.0, 2), 8, 6).unwrap();
    let log_full = full.run(&ds, None).unwrap();
    let mut part = SoftCcaTrainer::new(linear_config(1.0, 2), 8, 6).unwrap();
    let mut log = Vec::new();
    for _ in 0..17 {
        log.extend(part.train_step(&ds).unwrap());
    }
    let mut resumed = part.clone();
    drop(part);
    log.extend(resumed.run(&ds, None).unwrap());
    assert_eq!(log, log_full);
    assert_eq!(resumed.model, full.model);
}

#[test]
fn learnable_embedding_scale_collapses() {
    let (ds, _) = planted(5000, vec![0.9, 0.6], 25);
    let cfg = SoftCcaConfig {
        learn_bn_affine: true,
        lr: 0.05,
        epochs: 4,
        ..linear_config(1.0, 2)
    };
    let mut t = SoftCcaTrainer::new(cfg, 8, 6).unwrap();
    let log = t.run(&ds, None).unwrap();
    assert!(log.last().unwrap().total < 1e-3 * log[0].total);
    match t.model.branch1.layers().last().unwrap() {
        Layer::BatchNorm(bn) => assert!(bn.gamma.iter().all(|g| g.abs() < 1e-3), "{:?}", bn.gamma),
        other => panic!("embedding ends with {other:?}"),
    }
}

#[test]
fn divergence_is_reported() {
    let (mut ds, _) = planted(400, vec![0.8], 23);
    ds.view1.set(123, 0, f64::NAN);
    let mut t = SoftCcaTrainer::new(linear_config(1.0, 2), 8, 6).unwrap();
    let err = t.run(&ds, None).unwrap_err();
    assert!(matches!(err, crate::Error::Divergence { .. }), "{err}");
    assert!(err.to_string().contains("step"));
}

#[test]
fn frozen_bn_affine_stays_identity() {
    let (ds, _) = planted(400, vec![0.8], 24);
    let cfg = SoftCcaConfig {
        epochs: 2,
        ..linear_config(1.0, 2)
    };
    let mut t = SoftCcaTrainer::new(cfg, 8, 6).unwrap();
    t.run(&ds, None).unwrap();
    match t.model.branch1.layers().last().unwrap() {
        Layer::BatchNorm(bn) => {
            assert!(bn.gamma.iter().all(|&g| g == 1.0));
            assert!(bn.beta.iter().all(|&b| b == 0.0));
        }
        other => panic!("embedding ends with {other:?}"),
    }
}

#[test]
fn config_validation() {
    let bad = [
        SoftCcaConfig {
            k: 0,
            ..Default::default()
        },
        SoftCcaConfig {
            lambda: -1.0,
            ..Default::default()
        },
        SoftCcaConfig {
            alpha: 1.0,
            ..Default::default()
        },
        SoftCcaConfig {
            batch_size: 1,
            ..Default::default()
        },
        SoftCcaConfig {
            momentum: 1.0,
            ..Default::default()
        },
        SoftCcaConfig {
            variant: DecorrVariant::XCov,
            ..Default::default()
        },
    ];
    for c in bad {
        assert!(SoftCcaModel::new(&c, 4, 4).is_err(), "{c:?}");
    }
}

proptest::proptest! {
    #[test]
    fn correlation_ignores_joint_row_order(seed in 0u64..200) {
        let z1 = gaussian(12, 3, seed);
        let z2 = gaussian(12, 3, seed + 1000);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.reverse();
        perm.swap(0, 5);
        let a = correlation_strength(&z1, &z2).unwrap().total;
        let b = correlation_strength(&z1.select_rows(&perm), &z2.select_rows(&perm)).unwrap().total;
        proptest::prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn whitening_is_idempotent(seed in 0u64..100, k in 1usize..6) {
        let z = gaussian(3 * k + 4, k, seed);
        let w = exact_decorrelation_step(&z, 0.0).unwrap();
        let w2 = exact_decorrelation_step(&w, 0.0).unwrap();
        proptest::prop_assert!(w2.sub(&w).unwrap().max_abs() < 1e-6);
    }
}
