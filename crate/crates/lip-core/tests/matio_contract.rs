//! File-level I/O contract: byte-exact round trips and manifest validation.

mod common;

use std::fs;
use std::path::Path;

use lip_core::error::Error;
use lip_core::matio::{
    load_matrix, parse_matrix, render_matrix, save_matrix, validate_manifest, DatasetManifest,
    LabelKind,
};
use lip_core::Matrix;
use proptest::prelude::*;

#[test]
fn save_then_load_preserves_values_and_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut rng = common::rng(1);
    let m = common::gaussian(&mut rng, 7, 3);
    save_matrix(&m, &path).unwrap();
    let back = load_matrix(&path).unwrap();
    assert_eq!(m, back);
}

#[test]
fn reload_of_saved_file_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    // Non-canonical spellings on disk normalize once, then stay fixed.
    fs::write(&path, "0.50,1e0\n-0.,2.000\n").unwrap();
    let first = load_matrix(&path).unwrap();
    let canon = render_matrix(&first);
    save_matrix(&first, &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), canon);
    let second = load_matrix(&path).unwrap();
    assert_eq!(render_matrix(&second), canon);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_matrix(Path::new("/nonexistent/m.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.class(), lip_core::ErrorClass::Io);
}

proptest! {
    #[test]
    fn render_parse_round_trip_is_bitwise_exact(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in 0u64..500,
        scale in prop::sample::select(vec![1e-300, 1e-9, 1.0, 1e9, 1e300]),
    ) {
        let mut rng = common::rng(seed);
        let m = common::gaussian(&mut rng, rows, cols).mapv(|v| v * scale);
        let text = render_matrix(&m);
        let back = parse_matrix(&text, Path::new("prop.csv")).unwrap();
        prop_assert_eq!(m.dim(), back.dim());
        for (a, b) in m.iter().zip(back.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

fn write_dataset(dir: &Path, features: &Matrix, labels: &Matrix, kind: LabelKind) -> DatasetManifest {
    save_matrix(features, dir.join("x.csv")).unwrap();
    save_matrix(labels, dir.join("y.csv")).unwrap();
    DatasetManifest {
        features_path: "x.csv".to_string(),
        labels_path: "y.csv".to_string(),
        n: features.nrows(),
        q: features.ncols(),
        l: labels.ncols(),
        label_kind: kind,
    }
}

#[test]
fn manifest_round_trips_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(2);
    let x = common::gaussian(&mut rng, 6, 4);
    let g = common::one_hot(&mut rng, 6, 3);
    let manifest = write_dataset(dir.path(), &x, &g, LabelKind::OneHotTruth);
    let mpath = dir.path().join("manifest.json");
    manifest.save(&mpath).unwrap();
    let loaded = DatasetManifest::load(&mpath).unwrap();
    let data = validate_manifest(&loaded, dir.path()).unwrap();
    assert_eq!(data.features, x);
    assert_eq!(data.labels, g);
}

#[test]
fn manifest_shape_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(3);
    let x = common::gaussian(&mut rng, 6, 4);
    let g = common::one_hot(&mut rng, 6, 3);
    let mut manifest = write_dataset(dir.path(), &x, &g, LabelKind::OneHotTruth);
    manifest.q = 5;
    assert!(matches!(
        validate_manifest(&manifest, dir.path()),
        Err(Error::Shape(_))
    ));
}

#[test]
fn manifest_reports_first_bad_label_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(4);
    let x = common::gaussian(&mut rng, 4, 2);
    let mut g = common::one_hot(&mut rng, 4, 3);
    g[(2, 0)] = 0.0;
    g[(2, 1)] = 0.0;
    g[(2, 2)] = 0.0;
    let manifest = write_dataset(dir.path(), &x, &g, LabelKind::OneHotTruth);
    match validate_manifest(&manifest, dir.path()) {
        Err(Error::RowSum { row, .. }) => assert_eq!(row, 3),
        other => panic!("expected row-sum error, got {other:?}"),
    }
}

#[test]
fn candidate_set_manifest_accepts_multi_hot_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(5);
    let x = common::gaussian(&mut rng, 3, 2);
    let y = ndarray::array![[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
    let manifest = write_dataset(dir.path(), &x, &y, LabelKind::CandidateSet);
    assert!(validate_manifest(&manifest, dir.path()).is_ok());
}

#[test]
fn malformed_manifest_json_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mpath = dir.path().join("manifest.json");
    fs::write(&mpath, "{\"features_path\": 3}").unwrap();
    let err = DatasetManifest::load(&mpath).unwrap_err();
    assert!(matches!(err, Error::Json { .. }));
    assert_eq!(err.class(), lip_core::ErrorClass::Validation);
}
