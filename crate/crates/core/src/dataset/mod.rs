//! IMU recordings with time-aligned ground-truth attitude.
//!
//! Sequences are read from EuRoC- or TUM-VI-style directories, ground truth
//! is slerp-resampled onto the IMU clock, and the six input channels are
//! standardised with statistics pooled over the training split before being
//! cut into fixed-length windows.

mod files;
mod window;

pub use files::{load_sequence, read_gt_csv, read_imu_csv, write_euroc, DatasetFormat, RawImuRow};
pub use window::{augment, make_windows, Window};

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{exp_map, log_map, RotationMatrix, Trajectory};

/// Gyro magnitudes at or above this are rejected as corrupt (rad/s).
pub const MAX_GYRO: f64 = 50.0;
/// Accelerometer magnitudes at or above this are rejected as corrupt (m/s²).
pub const MAX_ACCEL: f64 = 200.0;
pub const STD_FLOOR: f64 = 1e-8;

/// One 6-axis measurement; `t` in seconds from the start of its sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl ImuSample {
    /// Channels in network order: gyro xyz then accel xyz.
    pub fn channels(&self) -> [f64; 6] {
        [
            self.gyro.x,
            self.gyro.y,
            self.gyro.z,
            self.accel.x,
            self.accel.y,
            self.accel.z,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthPose {
    pub t: f64,
    pub rotation: RotationMatrix,
}

/// IMU stream with ground truth resampled 1:1 onto its timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    imu: Vec<ImuSample>,
    gt: Trajectory,
}

impl Sequence {
    pub fn new(name: impl Into<String>, imu: Vec<ImuSample>, gt: Trajectory) -> Result<Self> {
        if imu.len() != gt.len() {
            return Err(Error::InvalidArgument(format!(
                "{} IMU samples but {} ground-truth poses",
                imu.len(),
                gt.len()
            )));
        }
        if let Some(i) = imu
            .iter()
            .zip(gt.timestamps())
            .position(|(s, t)| (s.t - t).abs() > 1e-9)
        {
            return Err(Error::Alignment(format!(
                "IMU and ground-truth timestamps differ at index {i}"
            )));
        }
        let dts: Vec<f64> = imu.windows(2).map(|w| w[1].t - w[0].t).collect();
        if let Some(med) = median(&dts) {
            if let Some(i) = dts.iter().position(|&d| d > 10.0 * med) {
                return Err(Error::Alignment(format!(
                    "gap of {:.6} s after sample {i} exceeds 10x the median interval {med:.6} s",
                    dts[i]
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            imu,
            gt,
        })
    }

    pub fn len(&self) -> usize {
        self.imu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imu.is_empty()
    }

    pub fn imu(&self) -> &[ImuSample] {
        &self.imu
    }

    pub fn gt(&self) -> &Trajectory {
        &self.gt
    }

    pub fn timestamps(&self) -> &[f64] {
        self.gt.timestamps()
    }

    pub fn gyro(&self) -> Vec<Vector3<f64>> {
        self.imu.iter().map(|s| s.gyro).collect()
    }

    pub fn duration(&self) -> f64 {
        self.imu.last().map_or(0.0, |l| l.t - self.imu[0].t)
    }

    /// Median sampling interval, or `None` for a single sample.
    pub fn median_dt(&self) -> Option<f64> {
        let dts: Vec<f64> = self.imu.windows(2).map(|w| w[1].t - w[0].t).collect();
        median(&dts)
    }

    /// Samples `range` as a new sequence named `name`.
    pub fn slice(&self, name: impl Into<String>, range: std::ops::Range<usize>) -> Result<Self> {
        Sequence::new(name, self.imu[range.clone()].to_vec(), self.gt.slice(range)?)
    }

    /// Splits at `seconds` after the first sample: `(train, validation)`.
    /// The validation part is `None` when nothing remains.
    pub fn split_at_time(&self, seconds: f64) -> Result<(Sequence, Option<Sequence>)> {
        let t0 = self.imu.first().map_or(0.0, |s| s.t);
        let cut = self.imu.partition_point(|s| s.t - t0 < seconds);
        if cut == 0 {
            return Err(Error::InvalidArgument(format!(
                "split at {seconds} s leaves no training samples in {}",
                self.name
            )));
        }
        let train = self.slice(format!("{}_train", self.name), 0..cut)?;
        let val = if cut < self.len() {
            Some(self.slice(format!("{}_val", self.name), cut..self.len())?)
        } else {
            None
        };
        Ok((train, val))
    }
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Some(s[s.len() / 2])
}

/// Resamples ground truth onto `query_times` by geodesic (slerp)
/// interpolation between the bracketing poses.
///
/// A query within 1e-9 s of a pose returns that pose unchanged.
pub fn interpolate_gt(poses: &[GroundTruthPose], query_times: &[f64]) -> Result<Trajectory> {
    const SNAP: f64 = 1e-9;
    if poses.is_empty() {
        return Err(Error::InvalidArgument("no ground-truth poses".into()));
    }
    let times: Vec<f64> = poses.iter().map(|p| p.t).collect();
    crate::so3::trajectory::check_increasing(&times)?;
    let (lo, hi) = (times[0], times[times.len() - 1]);
    let rotations = query_times
        .iter()
        .map(|&q| {
            if q < lo - SNAP || q > hi + SNAP {
                return Err(Error::OutOfRange { t: q, lo, hi });
            }
            let j = times.partition_point(|&t| t < q);
            if j < times.len() && (times[j] - q).abs() <= SNAP {
                return Ok(poses[j].rotation);
            }
            if j > 0 && (q - times[j - 1]).abs() <= SNAP {
                return Ok(poses[j - 1].rotation);
            }
            let (a, b) = (&poses[j - 1], &poses[j]);
            let s = (q - a.t) / (b.t - a.t);
            let delta = log_map(&(a.rotation.matrix().transpose() * b.rotation.matrix()));
            Ok(a.rotation * exp_map(&(delta * s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(query_times.to_vec(), rotations)
}

/// Per-channel mean and standard deviation of the six network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 6],
            std: [1.0; 6],
        }
    }

    pub fn normalize(&self, raw: [f64; 6]) -> [f64; 6] {
        std::array::from_fn(|c| (raw[c] - self.mean[c]) / self.std[c])
    }

    pub fn denormalize(&self, norm: [f64; 6]) -> [f64; 6] {
        std::array::from_fn(|c| norm[c] * self.std[c] + self.mean[c])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("plain numbers serialise");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: NormStats = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        if stats.std.iter().any(|&s| s.is_nan() || s < STD_FLOOR) {
            return Err(Error::InvalidArgument(format!(
                "{}: std components must be >= {STD_FLOOR}",
                path.display()
            )));
        }
        Ok(stats)
    }
}

/// Population mean/std per channel pooled over every sample of `sequences`,
/// with the std floored at [`STD_FLOOR`].
pub fn compute_norm_stats<'a>(sequences: impl IntoIterator<Item = &'a Sequence>) -> Result<NormStats> {
    let seqs: Vec<&Sequence> = sequences.into_iter().collect();
    let n: usize = seqs.iter().map(|s| s.len()).sum();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "normalisation statistics need at least 2 samples, got {n}"
        )));
    }
    let samples = || seqs.iter().flat_map(|s| s.imu.iter().map(ImuSample::channels));
    let mut mean = [0.0; 6];
    for ch in samples() {
        for c in 0..6 {
            mean[c] += ch[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = [0.0; 6];
    for ch in samples() {
        for c in 0..6 {
            var[c] += (ch[c] - mean[c]).powi(2);
        }
    }
    let std = var.map(|v| (v / n as f64).sqrt().max(STD_FLOOR));
    Ok(NormStats { mean, std })
}
