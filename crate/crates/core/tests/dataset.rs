mod common;

use std::path::Path;

use common::quat;
use lgc_core::dataset::{
    augment, compute_norm_stats, interpolate_gt, load_sequence, make_windows, read_imu_csv, write_euroc, DatasetFormat,
    GroundTruthPose, NormStats, RawImuRow,
};
use lgc_core::so3::RotationMatrix;
use lgc_core::Error;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IMU_HEADER: &str = "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n";
const GT_HEADER: &str =
    "#timestamp, p_RS_R_x [m], p_RS_R_y [m], p_RS_R_z [m], q_RS_w [], q_RS_x [], q_RS_y [], q_RS_z []\n";

fn write_file(path: &Path, body: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, body).unwrap();
}

fn imu_rows(ns: &[i64]) -> String {
    let mut s = IMU_HEADER.to_string();
    for (i, t) in ns.iter().enumerate() {
        let g = 0.01 * i as f64;
        s += &format!("{t},{g},-0.02,0.03,0.1,0.2,9.81\n");
    }
    s
}

fn gt_rows(ns: &[i64]) -> String {
    let mut s = GT_HEADER.to_string();
    for t in ns {
        s += &format!("{t},1.0,2.0,3.0,1.0,0.0,0.0,0.0,0.1,0.1,0.1\n");
    }
    s
}

fn to_na(q: quat::Quat) -> Matrix3<f64> {
    let m = quat::to_matrix(q);
    Matrix3::from_fn(|i, j| m[i][j])
}

#[test]
fn five_row_imu_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let ns: Vec<i64> = (0..5).map(|i| i * 5_000_000).collect();
    write_file(&dir.path().join("mav0/imu0/data.csv"), &imu_rows(&ns));
    write_file(
        &dir.path().join("mav0/state_groundtruth_estimate0/data.csv"),
        &gt_rows(&ns),
    );
    let seq = load_sequence(dir.path(), DatasetFormat::Euroc).unwrap();
    assert_eq!(seq.len(), 5);
    for (s, &n) in seq.imu().iter().zip(&ns) {
        assert_eq!(s.t, n as f64 * 1e-9);
        assert_eq!(s.accel, Vector3::new(0.1, 0.2, 9.81));
    }
    assert_eq!(seq.imu()[3].gyro.x, 0.03);
}

#[test]
fn timestamps_are_relative_to_first_retained_sample() {
    let dir = tempfile::tempdir().unwrap();
    let base = 1_403_636_579_758_555_392i64;
    let ns: Vec<i64> = (0..6).map(|i| base + i * 5_000_000).collect();
    write_file(&dir.path().join("imu0/data.csv"), &imu_rows(&ns));
    write_file(&dir.path().join("mocap0/data.csv"), &gt_rows(&ns[1..]));
    let seq = load_sequence(dir.path(), DatasetFormat::Tumvi).unwrap();
    assert_eq!(seq.len(), 5);
    assert_eq!(seq.imu()[0].t, 0.0);
    assert!((seq.imu()[4].t - 0.02).abs() < 1e-15);
}

#[test]
fn ground_truth_span_crops_imu() {
    let dir = tempfile::tempdir().unwrap();
    let ns: Vec<i64> = (0..6).map(|i| i * 5_000_000).collect();
    write_file(&dir.path().join("mav0/imu0/data.csv"), &imu_rows(&ns));
    write_file(
        &dir.path().join("mav0/state_groundtruth_estimate0/data.csv"),
        &gt_rows(&ns[2..5]),
    );
    let seq = load_sequence(dir.path(), DatasetFormat::Euroc).unwrap();
    assert_eq!(seq.len(), 3);
    assert_eq!(seq.imu()[0].gyro.x, 0.02);
}

#[test]
fn disjoint_ground_truth_is_an_alignment_error() {
    let dir = tempfile::tempdir().unwrap();
    let ns: Vec<i64> = (0..5).map(|i| i * 5_000_000).collect();
    let later: Vec<i64> = (10..15).map(|i| i * 5_000_000).collect();
    write_file(&dir.path().join("mav0/imu0/data.csv"), &imu_rows(&ns));
    write_file(
        &dir.path().join("mav0/state_groundtruth_estimate0/data.csv"),
        &gt_rows(&later),
    );
    assert!(matches!(
        load_sequence(dir.path(), DatasetFormat::Euroc),
        Err(Error::Alignment(_))
    ));
}

#[test]
fn non_numeric_field_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("imu.csv");
    let body = format!("{IMU_HEADER}0,0,0,0,0,0,9.8\n5000000,0,abc,0,0,0,9.8\n");
    write_file(&path, &body);
    match read_imu_csv(&path) {
        Err(Error::Parse { line, msg, .. }) => {
            assert_eq!(line, 3);
            assert!(msg.contains("abc"), "{msg}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn implausible_values_and_unordered_timestamps_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("imu.csv");
    write_file(&path, &format!("{IMU_HEADER}0,0,0,60,0,0,9.8\n"));
    let r = read_imu_csv(&path);
    assert!(matches!(r, Err(Error::Parse { line: 2, .. })), "{r:?}");
    write_file(&path, &format!("{IMU_HEADER}0,0,0,0,0,0,9.8\n0,0,0,0,0,0,9.8\n"));
    assert!(matches!(read_imu_csv(&path), Err(Error::Parse { line: 3, .. })));
    write_file(&path, &format!("{IMU_HEADER}0,0,0,0,0,0,500\n"));
    assert!(matches!(read_imu_csv(&path), Err(Error::Parse { .. })));
}

#[test]
fn missing_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_sequence(&dir.path().join("nope"), DatasetFormat::Euroc),
        Err(Error::Io { .. })
    ));
}

#[test]
fn interpolation_matches_quaternion_slerp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let qa = quat::normalize([rng.random(), rng.random(), rng.random(), rng.random::<f64>() - 0.5]);
        let step = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let qb = quat::mul(qa, quat::from_rotvec(step));
        let poses = [
            GroundTruthPose {
                t: 1.0,
                rotation: RotationMatrix::new(to_na(qa)).unwrap(),
            },
            GroundTruthPose {
                t: 1.5,
                rotation: RotationMatrix::new(to_na(qb)).unwrap(),
            },
        ];
        let s: f64 = rng.random();
        let traj = interpolate_gt(&poses, &[1.0 + 0.5 * s]).unwrap();
        let expected = to_na(quat::slerp(qa, qb, s));
        assert!((traj.rotations()[0].matrix() - expected).amax() < 1e-12);
    }
}

#[test]
fn interpolation_at_pose_times_is_exact_and_outside_is_an_error() {
    let poses: Vec<GroundTruthPose> = (0..4)
        .map(|i| GroundTruthPose {
            t: i as f64 * 0.1,
            rotation: RotationMatrix::rot_z(0.3 * i as f64),
        })
        .collect();
    let traj = interpolate_gt(&poses, &[0.0, 0.1, 0.2, 0.3]).unwrap();
    for (a, b) in traj.rotations().iter().zip(&poses) {
        assert_eq!(a, &b.rotation);
    }
    let mid = interpolate_gt(&poses, &[0.25]).unwrap();
    assert!((mid.rotations()[0].matrix() - RotationMatrix::rot_z(0.75).matrix()).amax() < 1e-14);
    assert!(matches!(interpolate_gt(&poses, &[0.31]), Err(Error::OutOfRange { .. })));
    assert!(matches!(
        interpolate_gt(&poses, &[-0.01]),
        Err(Error::OutOfRange { .. })
    ));
}

fn synthetic_seq(name: &str, len: usize, seed: u64) -> lgc_core::dataset::Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<RawImuRow> = (0..len)
        .map(|i| RawImuRow {
            ns: i as i64 * 5_000_000,
            gyro: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            accel: Vector3::new(0.0, 0.0, 9.81) + Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
        })
        .collect();
    let gt: Vec<(i64, RotationMatrix)> = (0..len)
        .map(|i| (i as i64 * 5_000_000, RotationMatrix::rot_z(0.01 * i as f64)))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    write_euroc(&path, DatasetFormat::Euroc, &rows, &gt).unwrap();
    load_sequence(&path, DatasetFormat::Euroc).unwrap()
}

#[test]
fn written_dataset_reloads_exactly() {
    let seq = synthetic_seq("MH_syn", 200, 3);
    assert_eq!(seq.name, "MH_syn");
    assert_eq!(seq.len(), 200);
    for (i, r) in seq.gt().rotations().iter().enumerate() {
        assert!((r.matrix() - RotationMatrix::rot_z(0.01 * i as f64).matrix()).amax() < 1e-12);
    }
}

#[test]
fn norm_stats_are_order_and_split_invariant() {
    let a = synthetic_seq("a", 300, 1);
    let b = synthetic_seq("b", 120, 2);
    let ab = compute_norm_stats([&a, &b]).unwrap();
    let ba = compute_norm_stats([&b, &a]).unwrap();
    let parts = [a.slice("a0", 0..77).unwrap(), a.slice("a1", 77..300).unwrap()];
    let split = compute_norm_stats([&parts[0], &parts[1], &b]).unwrap();
    for c in 0..6 {
        for other in [&ba, &split] {
            assert!((ab.mean[c] - other.mean[c]).abs() < 1e-12);
            assert!((ab.std[c] - other.std[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn norm_stats_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norm_stats.json");
    let st = NormStats {
        mean: [0.1, -0.2, 0.3, 0.01, 0.02, 9.81],
        std: [0.5, 0.6, 0.7, 1.0, 1.1, 0.3],
    };
    st.save(&path).unwrap();
    assert_eq!(NormStats::load(&path).unwrap(), st);
    std::fs::write(&path, r#"{"mean":[0,0,0,0,0,0],"std":[1,1,0,1,1,1]}"#).unwrap();
    assert!(NormStats::load(&path).is_err());
}

#[test]
fn windows_cover_the_sequence() {
    let seq = synthetic_seq("w", 100, 5);
    let stats = compute_norm_stats([&seq]).unwrap();
    let w = make_windows(&seq, &stats, 32, 16).unwrap();
    assert_eq!(w.len(), 5);
    assert_eq!(w[4].start, 64);
    for win in &w {
        assert_eq!(win.pad, 0);
        assert_eq!(win.data.len(), 6 * 32);
        assert_eq!(win.gt.len(), 32);
        let s = seq.imu()[win.start + 7];
        let expected = stats.normalize(s.channels());
        for c in 0..6 {
            assert_eq!(win.data[c * 32 + 7], expected[c]);
        }
        assert_eq!(win.gyro_at(7), [s.gyro.x, s.gyro.y, s.gyro.z]);
    }
    assert!(make_windows(&seq, &stats, 1, 1).is_err());
    assert!(make_windows(&seq, &stats, 8, 0).is_err());
}

#[test]
fn short_sequence_gets_one_left_padded_window() {
    let seq = synthetic_seq("short", 3, 6);
    let w = make_windows(&seq, &NormStats::identity(), 4, 1).unwrap();
    assert_eq!(w.len(), 1);
    assert_eq!(w[0].pad, 1);
    assert!((0..6).all(|c| w[0].data[c * 4] == 0.0));
    assert_eq!(w[0].gyro_at(0), [0.0; 3]);
    assert_eq!(w[0].gt.rotations()[0], w[0].gt.rotations()[1]);
    assert!(w[0].timestamps()[0] < w[0].timestamps()[1]);
}

#[test]
fn augmentation_noise_statistics() {
    let seq = synthetic_seq("aug", 2000, 7);
    let w = make_windows(&seq, &NormStats::identity(), 2000, 2000)
        .unwrap()
        .remove(0);
    let std = [0.01; 6];
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut count = 0.0;
    for seed in 0..84 {
        let a = augment(&w, &std, seed);
        for (x, y) in a.data.iter().zip(&w.data) {
            let d = x - y;
            sum += d;
            sq += d * d;
            count += 1.0;
        }
    }
    assert!(count > 1e6);
    let mean = sum / count;
    let sd = (sq / count - mean * mean).sqrt();
    assert!(mean.abs() < 1e-4, "mean {mean}");
    assert!((sd - 0.01).abs() < 1e-4, "std {sd}");
    assert_eq!(augment(&w, &std, 3), augment(&w, &std, 3));
    assert_ne!(augment(&w, &std, 3), augment(&w, &std, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_channels_are_standard(len in 10usize..200, seed in 0u64..1000) {
        let seq = synthetic_seq("p", len, seed);
        let st = compute_norm_stats([&seq]).unwrap();
        let w = make_windows(&seq, &st, len, 1).unwrap().remove(0);
        for c in 0..6 {
            let ch = &w.data[c * len..(c + 1) * len];
            let m = ch.iter().sum::<f64>() / len as f64;
            let v = ch.iter().map(|x| (x - m).powi(2)).sum::<f64>() / len as f64;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
        for (s, raw) in seq.imu().iter().map(|s| (s, st.denormalize(st.normalize(s.channels())))) {
            for (c, r) in raw.iter().enumerate() {
                prop_assert!((r - s.channels()[c]).abs() < 1e-12);
            }
        }
    }
}
