use std::path::{Path, PathBuf};

use lgc_cli::config::RunConfig;
use lgc_cli::CliError;
use lgc_core::dataset::{load_sequence, DatasetFormat, NormStats};
use lgc_core::model::ModelParams;
use lgc_core::so3::RotationMatrix;
use lgc_core::synth::{generate_truth, synthesize, ErrorModel, MotionProfile, SynthScenario, GRAVITY};
use tempfile::TempDir;

const TINY_MODEL: &str = r#"
[model]
window = 256
channels = [4, 4, 4, 4]
kernels = [3, 3, 3, 3]
dilations = [1, 2, 4, 8]
lka_kernel = 3
lka_dilated_kernel = 3
lka_dilation = 2
"#;

fn lgcnet(args: &[&str]) -> i32 {
    let mut full = vec!["lgcnet", "--quiet"];
    full.extend_from_slice(args);
    lgc_cli::run(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn synth_config(duration: f64, count: usize, profile: &str, model: &str) -> String {
    format!(
        "{TINY_MODEL}\n[train]\nepochs = 3\nlr = 0.005\n\n[data]\nsplit_seconds = {split}\n\n\
         [synth]\ncount = {count}\nduration = {duration}\n\n[synth.profile]\n{profile}\n\n{model}",
        split = duration * 0.7
    )
}

const BIAS_MODEL: &str = r#"
[synth.error_model]
gyro_bias = [0.02, -0.01, 0.015]
accel_bias = [0.0, 0.0, 0.0]
gyro_scale_misalign = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
accel_scale_misalign = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
g_sensitivity = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
gyro_noise_std = 0.0
accel_noise_std = 0.0
"#;

const SMOOTH: &str = "kind = \"random-smooth\"\nmax_rate = 1.5";

fn strict_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn synth_static_ideal_sensor() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &synth_config(2.0, 1, "kind = \"static\"", ""));
    let out = tmp.path().join("data");
    assert_eq!(lgcnet(&["synth", "--config", s(&cfg), "--out", s(&out)]), 0);
    let seq = load_sequence(&out.join("synth"), DatasetFormat::Euroc).unwrap();
    for imu in seq.imu() {
        assert!(imu.gyro.norm() < 1e-12);
        assert!((imu.accel - nalgebra::Vector3::new(0.0, 0.0, GRAVITY)).norm() < 1e-9);
    }
    assert_eq!(
        ErrorModel::load(&out.join("error_model.json")).unwrap(),
        ErrorModel::ideal()
    );
    assert!(out.join("manifest.json").exists());
}

#[test]
fn synth_pure_bias_and_reload_oracle() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &synth_config(3.0, 1, SMOOTH, BIAS_MODEL));
    let out = tmp.path().join("data");
    assert_eq!(
        lgcnet(&["synth", "--config", s(&cfg), "--out", s(&out), "--seed", "5"]),
        0
    );
    let loaded = load_sequence(&out.join("synth"), DatasetFormat::Euroc).unwrap();

    let run_cfg = RunConfig::load(&cfg).unwrap().with_seed(Some(5));
    let scenario = SynthScenario {
        duration: 3.0,
        rate: 200.0,
        profile: MotionProfile::RandomSmooth { max_rate: 1.5 },
        seed: 5,
    };
    let truth = generate_truth(&scenario).unwrap();
    let bias = nalgebra::Vector3::new(0.02, -0.01, 0.015);
    for (imu, w) in loaded.imu().iter().zip(&truth.omega) {
        assert!((imu.gyro - w - bias).norm() < 1e-12);
    }

    let model = run_cfg.synth.error_model.unwrap();
    let (mem, _) = synthesize("synth", &scenario, &model, lgc_cli::commands::synth::noise_seed(5, 0)).unwrap();
    assert_eq!(mem.len(), loaded.len());
    for (a, b) in mem.imu().iter().zip(loaded.imu()) {
        assert!((a.t - b.t).abs() < 1e-12);
        assert!((a.gyro - b.gyro).norm() < 1e-12);
        assert!((a.accel - b.accel).norm() < 1e-12);
    }
    for (a, b) in mem.gt().rotations().iter().zip(loaded.gt().rotations()) {
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);
    }
}

fn make_dataset(tmp: &Path, duration: f64, count: usize, model: &str, seed: &str) -> (PathBuf, Vec<PathBuf>) {
    let cfg = write_config(tmp, "c.toml", &synth_config(duration, count, SMOOTH, model));
    let out = tmp.join("data");
    assert_eq!(
        lgcnet(&["synth", "--config", s(&cfg), "--out", s(&out), "--seed", seed]),
        0
    );
    let dirs = if count == 1 {
        vec![out.join("synth")]
    } else {
        (0..count).map(|i| out.join(format!("synth_{i}"))).collect()
    };
    (cfg, dirs)
}

fn train_args<'a>(cfg: &'a Path, out: &'a Path, data: &'a [PathBuf]) -> Vec<&'a str> {
    let mut a = vec!["train", "--config", s(cfg), "--out", s(out), "--dataset"];
    a.extend(data.iter().map(|d| s(d)));
    a
}

#[test]
fn zero_learning_rate_checkpoint_equals_initialisation() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = make_dataset(tmp.path(), 20.0, 1, BIAS_MODEL, "1");
    let cfg = write_config(
        tmp.path(),
        "t.toml",
        &format!("{TINY_MODEL}\n[train]\nepochs = 1\nlr = 0.0\nseed = 7\n\n[data]\nsplit_seconds = 14.0\n"),
    );
    let out = tmp.path().join("run");
    assert_eq!(lgcnet(&train_args(&cfg, &out, &data)), 0);
    let rc = RunConfig::load(&cfg).unwrap();
    let init = ModelParams::init(&rc.model, 7).unwrap();
    assert_eq!(
        ModelParams::load(&out.join("checkpoint_best.ckpt"), &rc.model).unwrap(),
        init
    );
    assert_eq!(
        ModelParams::load(&out.join("checkpoint_last.ckpt"), &rc.model).unwrap(),
        init
    );
    let (_, rows) = strict_rows(&out.join("train_report.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn training_is_reproducible_and_logs_every_epoch() {
    let tmp = TempDir::new().unwrap();
    let (cfg, data) = make_dataset(tmp.path(), 20.0, 2, BIAS_MODEL, "3");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(lgcnet(&train_args(&cfg, &a, &data)), 0);
    assert_eq!(lgcnet(&train_args(&cfg, &b, &data)), 0);
    let (header, ra) = strict_rows(&a.join("train_report.csv"));
    let (_, rb) = strict_rows(&b.join("train_report.csv"));
    assert_eq!(header, ["epoch", "train_loss", "val_loss", "lr", "seconds"]);
    assert_eq!(ra.len(), 3);
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x[..4], y[..4]);
    }
    for f in ["checkpoint_best.ckpt", "checkpoint_last.ckpt", "norm_stats.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

fn zero_checkpoint(dir: &Path) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let cfg = RunConfig::parse(TINY_MODEL, Path::new("inline")).unwrap();
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).unwrap();
    NormStats::identity().save(&dir.join("norm_stats.json")).unwrap();
    let p = dir.join("zero.ckpt");
    ModelParams::zero_network(&cfg.model).unwrap().save(&p).unwrap();
    p
}

#[test]
fn zero_network_on_ideal_data_matches_raw_and_euler_round_trips() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = make_dataset(tmp.path(), 10.0, 1, "", "2");
    let ckpt = zero_checkpoint(&tmp.path().join("ck"));
    let out = tmp.path().join("ev");
    assert_eq!(
        lgcnet(&[
            "eval",
            "--checkpoint",
            s(&ckpt),
            "--out",
            s(&out),
            "--with-raw-baseline",
            "--dataset",
            s(&data[0])
        ]),
        0
    );
    let (header, rows) = strict_rows(&out.join("aoe.csv"));
    assert_eq!(header, ["sequence", "aoe_deg_calibrated", "aoe_deg_raw"]);
    let cal: f64 = rows[0][1].parse().unwrap();
    let raw: f64 = rows[0][2].parse().unwrap();
    assert_eq!(cal, raw);
    assert!(cal < 1e-6);

    let seq = load_sequence(&data[0], DatasetFormat::Euroc).unwrap();
    let (h, orient) = strict_rows(&out.join("orientation_synth.csv"));
    assert_eq!(h.len(), 10);
    assert_eq!(orient.len(), seq.len());
    for (row, r) in orient.iter().zip(seq.gt().rotations()) {
        let v: Vec<f64> = row.iter().map(|x| x.parse().unwrap()).collect();
        let back = RotationMatrix::from_euler_zyx(v[1].to_radians(), v[2].to_radians(), v[3].to_radians());
        let (_, pitch, _) = r.to_euler_zyx();
        if pitch.abs() < 1.5 {
            assert!((back.matrix() - r.matrix()).norm() < 1e-9);
        }
    }
}

#[test]
fn eval_without_baseline_leaves_raw_empty() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = make_dataset(tmp.path(), 5.0, 1, BIAS_MODEL, "2");
    let ckpt = zero_checkpoint(&tmp.path().join("ck"));
    let out = tmp.path().join("ev");
    assert_eq!(
        lgcnet(&[
            "eval",
            "--checkpoint",
            s(&ckpt),
            "--out",
            s(&out),
            "--dataset",
            s(&data[0])
        ]),
        0
    );
    let (_, rows) = strict_rows(&out.join("aoe.csv"));
    assert_eq!(rows[0][2], "");
    let yaw = tmp.path().join("ev_yaw");
    assert_eq!(
        lgcnet(&[
            "eval",
            "--checkpoint",
            s(&ckpt),
            "--out",
            s(&yaw),
            "--yaw-only-align",
            "--dataset",
            s(&data[0])
        ]),
        0
    );
}

#[test]
fn raw_baseline_grows_with_duration() {
    let tmp = TempDir::new().unwrap();
    let ckpt = zero_checkpoint(&tmp.path().join("ck"));
    let mut last = 0.0;
    for d in [10.0, 20.0, 40.0] {
        let dir = tmp.path().join(format!("d{d}"));
        std::fs::create_dir_all(&dir).unwrap();
        let (_, data) = make_dataset(&dir, d, 1, BIAS_MODEL, "4");
        let out = dir.join("ev");
        assert_eq!(
            lgcnet(&[
                "eval",
                "--checkpoint",
                s(&ckpt),
                "--out",
                s(&out),
                "--with-raw-baseline",
                "--dataset",
                s(&data[0])
            ]),
            0
        );
        let (_, rows) = strict_rows(&out.join("aoe.csv"));
        let raw: f64 = rows[0][2].parse().unwrap();
        assert!(raw > last, "{d} s: raw AOE {raw} not above {last}");
        last = raw;
    }
}

#[test]
fn checkpoint_config_mismatch_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = make_dataset(tmp.path(), 5.0, 1, "", "2");
    let ckpt = zero_checkpoint(&tmp.path().join("ck"));
    let other = write_config(tmp.path(), "other.toml", "[model]\nwindow = 256\n");
    let out = tmp.path().join("ev");
    let code = lgcnet(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--config",
        s(&other),
        "--norm-stats",
        s(&tmp.path().join("ck/norm_stats.json")),
        "--out",
        s(&out),
        "--dataset",
        s(&data[0]),
    ]);
    assert_eq!(code, 1);
    let err = ModelParams::load(&ckpt, &RunConfig::default().model).unwrap_err();
    assert!(err.to_string().contains("does not match"), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(lgcnet(&["train", "--out", s(&out), "--config", "/nonexistent.toml"]), 1);
    let bad = write_config(tmp.path(), "bad.toml", "[train]\nepoch = 3\n");
    assert_eq!(
        lgcnet(&["train", "--out", s(&out), "--config", s(&bad), "--dataset", "x"]),
        1
    );
    let zero = write_config(tmp.path(), "zero.toml", "[train]\nepochs = 0\n");
    assert_eq!(
        lgcnet(&["train", "--out", s(&out), "--config", s(&zero), "--dataset", "x"]),
        1
    );
    assert_eq!(lgcnet(&["train", "--out", s(&out)]), 1);
    assert_eq!(
        lgcnet(&["train", "--out", s(&out), "--dataset", s(&tmp.path().join("missing"))]),
        2
    );
    assert_eq!(lgcnet(&["nonsense"]), 1);
    assert_eq!(lgcnet(&["--help"]), 0);
    let nf = CliError::Core(lgc_core::Error::NonFinite {
        epoch: 4,
        detail: "x".into(),
    });
    assert_eq!(nf.exit_code(), 3);
}

#[test]
fn ablation_produces_paired_tables() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = make_dataset(tmp.path(), 30.0, 2, BIAS_MODEL, "6");
    let cfg = write_config(
        tmp.path(),
        "a.toml",
        &format!("{TINY_MODEL}\n[train]\nepochs = 40\nlr = 0.005\n\n[data]\nsplit_seconds = 20.0\n"),
    );
    let out = tmp.path().join("abl");
    let mut args = vec!["ablate", "--config", s(&cfg), "--out", s(&out), "--dataset"];
    args.extend(data.iter().map(|d| s(d)));
    assert_eq!(lgcnet(&args), 0);
    let (header, rows) = strict_rows(&out.join("ablation.csv"));
    assert_eq!(header, ["sequence", "aoe_deg_lka", "aoe_deg_no_lka", "aoe_deg_raw"]);
    assert_eq!(rows.last().unwrap()[0], "mean");
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[0] < v[2] && v[1] < v[2], "{r:?}");
    }
    let (_, summary) = strict_rows(&out.join("ablation_summary.csv"));
    let with: usize = summary[0][2].parse().unwrap();
    let without: usize = summary[1][2].parse().unwrap();
    assert!(without < with);
    assert!(out.join("lka/checkpoint_best.ckpt").exists());
    assert!(out.join("no_lka/checkpoint_best.ckpt").exists());
}

#[test]
fn config_defaults_and_round_trip() {
    let cfg = RunConfig::parse("", Path::new("x")).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.model.window, 16_000);
    assert_eq!(cfg.train.lr, 8e-4);
    assert_eq!(cfg.data.split_seconds, 50.0);
    let back = RunConfig::parse(&cfg.to_toml(), Path::new("x")).unwrap();
    assert_eq!(back, cfg);
    let with_model = RunConfig::parse(&synth_config(5.0, 1, SMOOTH, BIAS_MODEL), Path::new("x")).unwrap();
    assert_eq!(
        RunConfig::parse(&with_model.to_toml(), Path::new("x")).unwrap(),
        with_model
    );
}
