use std::io::Write;

use super::*;
use crate::linalg::matmul_tn;

fn two_images() -> IdxImages {
    let mut pixels: Vec<u8> = (0..2 * 28 * 28).map(|i| (i * 7 % 256) as u8).collect();
    pixels[0] = 255;
    pixels[1] = 0;
    IdxImages {
        count: 2,
        rows: 28,
        cols: 28,
        pixels,
    }
}

#[test]
fn idx_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
    let imgs = two_images();
    write_idx_images(&ip, &imgs).unwrap();
    write_idx_labels(&lp, &[3, 9]).unwrap();
    assert_eq!(read_idx_images(&ip).unwrap(), imgs);
    let (m, labels) = load_idx(&ip, &lp).unwrap();
    assert_eq!(labels, vec![3, 9]);
    assert_eq!(m.shape(), (2, 784));
    assert_eq!(m.get(0, 0), 1.0);
    assert_eq!(m.get(0, 1), 0.0);
    for (v, p) in m.data().iter().zip(&imgs.pixels) {
        assert_eq!(*v, f64::from(*p) / 255.0);
    }
}

#[test]
fn header_is_big_endian() {
    let dir = tempfile::tempdir().unwrap();
    let ip = dir.path().join("img");
    write_idx_images(&ip, &two_images()).unwrap();
    let raw = std::fs::read(&ip).unwrap();
    assert_eq!(&raw[..4], &[0, 0, 8, 3]);
    assert_eq!(&raw[4..8], &[0, 0, 0, 2]);
    assert_eq!(&raw[8..12], &[0, 0, 0, 28]);
    assert_eq!(&raw[12..16], &[0, 0, 0, 28]);
}

#[test]
fn gzip_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let (plain, gz) = (dir.path().join("lab"), dir.path().join("lab.gz"));
    write_idx_labels(&plain, &[1, 2, 3]).unwrap();
    let bytes = std::fs::read(&plain).unwrap();
    let mut enc = flate2::write::GzEncoder::new(
        std::fs::File::create(&gz).unwrap(),
        flate2::Compression::default(),
    );
    enc.write_all(&bytes).unwrap();
    enc.finish().unwrap();
    assert_eq!(read_idx_labels(&gz).unwrap(), vec![1, 2, 3]);
}

#[test]
fn bad_magic_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("lab");
    write_idx_labels(&lp, &[1]).unwrap();
    let err = read_idx_images(&lp).unwrap_err();
    assert!(matches!(err, crate::Error::Format { .. }), "{err}");
    assert!(err.to_string().contains("2049"));
}

#[test]
fn truncation_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let ip = dir.path().join("img");
    write_idx_images(&ip, &two_images()).unwrap();
    let raw = std::fs::read(&ip).unwrap();
    std::fs::write(&ip, &raw[..100]).unwrap();
    let err = read_idx_images(&ip).unwrap_err().to_string();
    assert!(err.contains("byte offset 16"), "{err}");
    std::fs::write(&ip, &raw[..6]).unwrap();
    let err = read_idx_images(&ip).unwrap_err().to_string();
    assert!(err.contains("byte offset 4"), "{err}");
}

#[test]
fn label_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
    write_idx_images(&ip, &two_images()).unwrap();
    write_idx_labels(&lp, &[1, 2, 3]).unwrap();
    assert!(load_idx(&ip, &lp).is_err());
}

#[test]
fn halves_of_split_image() {
    let img = Matrix::from_fn(1, 784, |_, c| if c % 28 < 14 { 1.0 } else { 0.0 });
    let ds = split_halves(&img, Some(vec![4])).unwrap();
    assert_eq!(ds.dims(), (392, 392));
    assert!(ds.view1.data().iter().all(|&v| v == 1.0));
    assert!(ds.view2.data().iter().all(|&v| v == 0.0));
    assert_eq!(ds.labels, Some(vec![4]));
}

#[test]
fn halves_rejoin() {
    let img = Matrix::from_fn(3, 784, |r, c| (r * 784 + c) as f64);
    let ds = split_halves(&img, None).unwrap();
    assert_eq!(join_halves(&ds.view1, &ds.view2).unwrap(), img);
    assert!(split_halves(&Matrix::zeros(1, 783), None).is_err());
}

#[test]
fn synth_is_deterministic() {
    let spec = SynthSpec {
        n: 50,
        d1: 6,
        d2: 5,
        rho: vec![0.9, 0.5],
        seed: 3,
    };
    let (a, truth) = synth_correlated(&spec).unwrap();
    let (b, _) = synth_correlated(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(truth, vec![0.9, 0.5]);
    assert_eq!(a.dims(), (6, 5));
    let (c, _) = synth_correlated(&SynthSpec { seed: 4, ..spec }).unwrap();
    assert_ne!(a.view1, c.view1);
}

#[test]
fn synth_rejects_bad_rho() {
    let spec = |rho: Vec<f64>| SynthSpec {
        n: 10,
        d1: 3,
        d2: 3,
        rho,
        seed: 0,
    };
    assert!(synth_correlated(&spec(vec![0.0])).is_err());
    assert!(synth_correlated(&spec(vec![1.2])).is_err());
    assert!(synth_correlated(&spec(vec![0.5; 4])).is_err());
}

#[test]
fn random_orthogonal_is_orthogonal() {
    let mut r = crate::rng::stream(0, 0);
    let q = random_orthogonal(20, &mut r);
    let qtq = matmul_tn(&q, &q).unwrap();
    assert!(qtq.sub(&Matrix::identity(20)).unwrap().max_abs() < 1e-12);
}

#[test]
fn batches_partition_and_repeat() {
    let plan = BatchPlan::new(4, 11, false).unwrap();
    let a = batch_indices(10, &plan, 0).unwrap();
    assert_eq!(a, batch_indices(10, &plan, 0).unwrap());
    assert_ne!(a, batch_indices(10, &plan, 1).unwrap());
    let mut all: Vec<usize> = a.concat();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());
    assert_eq!(a.len(), plan.batches_per_epoch(10));
    assert!(a.iter().all(|b| b.len() >= 2));
}

#[test]
fn single_sample_tail_is_merged() {
    let plan = BatchPlan::new(4, 1, false).unwrap();
    let b = batch_indices(9, &plan, 0).unwrap();
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
    assert_eq!(plan.batches_per_epoch(9), 2);
}

#[test]
fn drop_last_drops_tail() {
    let plan = BatchPlan::new(4, 1, true).unwrap();
    let b = batch_indices(10, &plan, 2).unwrap();
    assert_eq!(b.len(), 2);
    assert!(b.iter().all(|x| x.len() == 4));
    assert_eq!(plan.batches_per_epoch(10), 2);
}

#[test]
fn batch_plan_errors() {
    assert!(BatchPlan::new(1, 0, false).is_err());
    let plan = BatchPlan::new(8, 0, false).unwrap();
    assert!(matches!(
        batch_indices(5, &plan, 0),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn views_co_travel() {
    let v1 = Matrix::from_fn(12, 2, |r, c| (r * 10 + c) as f64);
    let v2 = Matrix::from_fn(12, 3, |r, c| (r * 100 + c) as f64);
    let ds = PairedDataset::new(v1, v2, Some((0..12).collect()), "t").unwrap();
    let plan = BatchPlan::new(5, 2, false).unwrap();
    for idx in batch_indices(12, &plan, 3).unwrap() {
        let b = ds.select(&idx);
        for (r, &i) in idx.iter().enumerate() {
            assert_eq!(b.view1.get(r, 0), (i * 10) as f64);
            assert_eq!(b.view2.get(r, 0), (i * 100) as f64);
            assert_eq!(b.labels.as_ref().unwrap()[r], i);
        }
    }
}

#[test]
fn paired_dataset_checks_rows() {
    assert!(PairedDataset::new(Matrix::zeros(3, 1), Matrix::zeros(2, 1), None, "").is_err());
    assert!(
        PairedDataset::new(Matrix::zeros(2, 1), Matrix::zeros(2, 1), Some(vec![0]), "").is_err()
    );
}

#[test]
fn subset_is_seeded_prefix() {
    let a = subset_indices(100, 10, 5).unwrap();
    assert_eq!(a, subset_indices(100, 10, 5).unwrap());
    let mut s = a.clone();
    s.sort_unstable();
    s.dedup();
    assert_eq!(s.len(), 10);
    assert_eq!(&subset_indices(100, 20, 5).unwrap()[..10], &a[..]);
    assert!(subset_indices(5, 6, 0).is_err());
}

proptest::proptest! {
    #[test]
    fn batches_cover_every_index_once(n in 2usize..200, m in 2usize..50, seed in 0u64..100, epoch in 0u64..5) {
        proptest::prop_assume!(m <= n);
        let plan = BatchPlan::new(m, seed, false).unwrap();
        let b = batch_indices(n, &plan, epoch).unwrap();
        let mut all = b.concat();
        all.sort_unstable();
        proptest::prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        proptest::prop_assert_eq!(b.len(), plan.batches_per_epoch(n));
    }
}
