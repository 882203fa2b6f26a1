pub mod ablate;
pub mod eval;
pub mod synth;
pub mod train;

use std::io::Write;
use std::path::{Path, PathBuf};

use lgc_core::dataset::{compute_norm_stats, load_sequence, make_windows, DatasetFormat, NormStats, Sequence, Window};
use lgc_core::model::ModelParams;
use lgc_core::so3::{Alignment, Trajectory};
use lgc_core::trainer::{evaluate, train, SequenceResult, TrainOutcome};

use crate::config::{Normalization, RunConfig};
use crate::error::{CliError, Result};
use crate::Common;

pub const CHECKPOINT_BEST: &str = "checkpoint_best.ckpt";
pub const CHECKPOINT_LAST: &str = "checkpoint_last.ckpt";
pub const NORM_STATS: &str = "norm_stats.json";
pub const REPORT: &str = "train_report.csv";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const AOE_TABLE: &str = "aoe.csv";

fn config_origin(common: &Common) -> PathBuf {
    common.config.clone().unwrap_or_else(|| PathBuf::from("<defaults>"))
}

/// Configuration with the command-line seed applied, validated.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load_or_default(common.config.as_deref())?.with_seed(common.seed);
    cfg.validate(&config_origin(common))?;
    Ok(cfg)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_sequences(dirs: &[PathBuf], format: DatasetFormat) -> Result<Vec<Sequence>> {
    if dirs.is_empty() {
        return Err(CliError::Usage("at least one --dataset directory is required".into()));
    }
    dirs.iter()
        .map(|d| {
            let s = load_sequence(d, format)?;
            log::info!("loaded {} ({} samples, {:.1} s)", s.name, s.len(), s.duration());
            Ok(s)
        })
        .collect()
}

/// Training and validation windows cut from the `--dataset` sequences.
pub struct Prepared {
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    /// Pooled training statistics (global normalisation only).
    pub stats: Option<NormStats>,
    pub val_sequences: Vec<Sequence>,
}

/// Splits each sequence at `data.split_seconds` and windows both parts.
pub fn prepare(seqs: &[Sequence], cfg: &RunConfig) -> Result<Prepared> {
    let n = cfg.model.window;
    let stride = cfg.train.stride_for(n);
    let mut parts = Vec::with_capacity(seqs.len());
    for s in seqs {
        parts.push(s.split_at_time(cfg.data.split_seconds)?);
    }
    let stats = match cfg.data.normalization {
        Normalization::Global => Some(compute_norm_stats(parts.iter().map(|(t, _)| t))?),
        Normalization::PerSequence => None,
    };
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut val_sequences = Vec::new();
    for (tr, va) in parts {
        let own;
        let st = match &stats {
            Some(s) => s,
            None => {
                own = compute_norm_stats([&tr])?;
                &own
            }
        };
        train.extend(make_windows(&tr, st, n, stride)?);
        if let Some(va) = va {
            val.extend(make_windows(&va, st, n, n)?);
            val_sequences.push(va);
        }
    }
    if val.is_empty() {
        return Err(CliError::Core(lgc_core::Error::Alignment(format!(
            "no validation data: every sequence ends within the first {} s",
            cfg.data.split_seconds
        ))));
    }
    log::info!(
        "{} training windows, {} validation windows of {n} samples",
        train.len(),
        val.len()
    );
    Ok(Prepared {
        train,
        val,
        stats,
        val_sequences,
    })
}

/// Trains from the configured seed and writes checkpoints, report,
/// statistics and the resolved configuration into `out`.
pub fn train_into(cfg: &RunConfig, data: &Prepared, out: &Path) -> Result<TrainOutcome> {
    ensure_dir(out)?;
    let init = ModelParams::init(&cfg.model, cfg.train.seed)?;
    log::info!(
        "training {} parameters for {} epochs (receptive field {})",
        init.param_count(),
        cfg.train.epochs,
        cfg.model.receptive_field()
    );
    let outcome = train(&data.train, &data.val, init, &cfg.train)?;
    outcome.best.save(&out.join(CHECKPOINT_BEST))?;
    outcome.last.save(&out.join(CHECKPOINT_LAST))?;
    outcome.report.write_csv(&out.join(REPORT))?;
    if let Some(stats) = &data.stats {
        stats.save(&out.join(NORM_STATS))?;
    }
    write_text(&out.join(RESOLVED_CONFIG), &cfg.to_toml())?;
    Ok(outcome)
}

/// Scores `params` on `seqs`; per-sequence normalisation uses each
/// sequence's own statistics.
pub fn score(
    params: &ModelParams,
    seqs: &[Sequence],
    stats: Option<&NormStats>,
    alignment: Alignment,
) -> Result<Vec<SequenceResult>> {
    let mut results = match stats {
        Some(s) => evaluate(params, seqs, s, alignment)?,
        None => {
            let mut all = Vec::with_capacity(seqs.len());
            for s in seqs {
                let own = compute_norm_stats([s])?;
                all.extend(evaluate(params, std::slice::from_ref(s), &own, alignment)?);
            }
            all
        }
    };
    results.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(results)
}

/// `sequence,aoe_deg_calibrated,aoe_deg_raw`, rows sorted by name. The raw
/// column is left empty without the baseline.
pub fn write_aoe_csv(path: &Path, results: &[SequenceResult], with_raw: bool) -> Result<()> {
    let mut text = String::from("sequence,aoe_deg_calibrated,aoe_deg_raw\n");
    for r in results {
        let raw = if with_raw { r.aoe_raw.to_string() } else { String::new() };
        text.push_str(&format!("{},{},{raw}\n", r.name, r.aoe_calibrated));
    }
    write_text(path, &text)
}

/// Roll, pitch and yaw in degrees (intrinsic Z-Y-X) of ground truth, raw
/// and calibrated attitude.
pub fn write_orientation_csv(path: &Path, gt: &Trajectory, raw: Option<&Trajectory>, cal: &Trajectory) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    let io = |e| CliError::io(path, e);
    writeln!(
        w,
        "timestamp,gt_roll,gt_pitch,gt_yaw,raw_roll,raw_pitch,raw_yaw,cal_roll,cal_pitch,cal_yaw"
    )
    .map_err(io)?;
    let deg = |r: &lgc_core::so3::RotationMatrix| {
        let (a, b, c) = r.to_euler_zyx();
        [a.to_degrees(), b.to_degrees(), c.to_degrees()]
    };
    for (k, t) in gt.timestamps().iter().enumerate() {
        let g = deg(&gt.rotations()[k]);
        let c = deg(&cal.rotations()[k]);
        let r = match raw {
            Some(raw) => deg(&raw.rotations()[k]).map(|v| v.to_string()),
            None => [String::new(), String::new(), String::new()],
        };
        writeln!(
            w,
            "{t},{},{},{},{},{},{},{},{},{}",
            g[0], g[1], g[2], r[0], r[1], r[2], c[0], c[1], c[2]
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
