use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{interpolate_gt, GroundTruthPose, ImuSample, Sequence, MAX_ACCEL, MAX_GYRO};
use crate::error::{Error, Result};
use crate::so3::RotationMatrix;

/// On-disk layout of a recording directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Euroc,
    Tumvi,
}

impl DatasetFormat {
    fn gt_dir(self) -> &'static str {
        match self {
            DatasetFormat::Euroc => "state_groundtruth_estimate0",
            DatasetFormat::Tumvi => "mocap0",
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euroc" => Ok(DatasetFormat::Euroc),
            "tumvi" | "tum-vi" => Ok(DatasetFormat::Tumvi),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset format {other:?} (expected euroc or tumvi)"
            ))),
        }
    }
}

/// IMU row as stored on disk, timestamp in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawImuRow {
    pub ns: i64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

fn locate(dir: &Path, sub: &str) -> Result<PathBuf> {
    let candidates = [
        dir.join("mav0").join(sub).join("data.csv"),
        dir.join(sub).join("data.csv"),
    ];
    candidates.iter().find(|p| p.is_file()).cloned().ok_or_else(|| {
        Error::io(
            &candidates[0],
            std::io::Error::new(std::io::ErrorKind::NotFound, "data.csv not found"),
        )
    })
}

/// Numeric rows of a comma-separated file, skipping `#` comments and blank
/// lines. Each row is returned with its 1-based line number.
fn numeric_rows(path: &Path, min_cols: usize) -> Result<Vec<(u64, i64, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() < min_cols {
            return Err(err(format!(
                "expected at least {min_cols} columns, found {}",
                fields.len()
            )));
        }
        let ns = parse_ns(fields[0]).ok_or_else(|| err(format!("bad timestamp {:?}", fields[0])))?;
        let values = fields[1..min_cols]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("non-numeric field {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((line, ns, values));
    }
    Ok(out)
}

fn parse_ns(s: &str) -> Option<i64> {
    s.parse::<i64>().ok().or_else(|| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| v.round() as i64)
    })
}

/// Reads `timestamp_ns, wx, wy, wz, ax, ay, az` rows.
pub fn read_imu_csv(path: &Path) -> Result<Vec<RawImuRow>> {
    let rows = numeric_rows(path, 7)?;
    let mut out: Vec<RawImuRow> = Vec::with_capacity(rows.len());
    for (line, ns, v) in rows {
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let gyro = Vector3::new(v[0], v[1], v[2]);
        let accel = Vector3::new(v[3], v[4], v[5]);
        if gyro.amax() >= MAX_GYRO {
            return Err(err(format!("gyro component beyond {MAX_GYRO} rad/s")));
        }
        if accel.amax() >= MAX_ACCEL {
            return Err(err(format!("accelerometer component beyond {MAX_ACCEL} m/s^2")));
        }
        if let Some(prev) = out.last() {
            if ns <= prev.ns {
                return Err(err(format!("timestamp {ns} not after previous {}", prev.ns)));
            }
        }
        out.push(RawImuRow { ns, gyro, accel });
    }
    Ok(out)
}

/// Reads `timestamp_ns, px, py, pz, qw, qx, qy, qz, ...` rows; only the
/// orientation is kept.
pub fn read_gt_csv(path: &Path) -> Result<Vec<(i64, RotationMatrix)>> {
    let rows = numeric_rows(path, 8)?;
    let mut out: Vec<(i64, RotationMatrix)> = Vec::with_capacity(rows.len());
    for (line, ns, v) in rows {
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let r = RotationMatrix::from_quaternion(v[3], v[4], v[5], v[6]).map_err(|e| err(e.to_string()))?;
        if let Some(&(prev, _)) = out.last() {
            if ns <= prev {
                return Err(err(format!("timestamp {ns} not after previous {prev}")));
            }
        }
        out.push((ns, r));
    }
    Ok(out)
}

/// Loads a recording directory, keeping only IMU samples inside the
/// ground-truth time span. Times are re-based to the first kept sample.
pub fn load_sequence(dir: &Path, format: DatasetFormat) -> Result<Sequence> {
    let imu = read_imu_csv(&locate(dir, "imu0")?)?;
    let gt = read_gt_csv(&locate(dir, format.gt_dir())?)?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    sequence_from_rows(name, &imu, &gt)
}

pub(crate) fn sequence_from_rows(name: String, imu: &[RawImuRow], gt: &[(i64, RotationMatrix)]) -> Result<Sequence> {
    let (Some(&(gt_lo, _)), Some(&(gt_hi, _))) = (gt.first(), gt.last()) else {
        return Err(Error::Alignment(format!("{name}: no ground-truth poses")));
    };
    let kept: Vec<&RawImuRow> = imu.iter().filter(|r| r.ns >= gt_lo && r.ns <= gt_hi).collect();
    let Some(origin) = kept.first().map(|r| r.ns) else {
        return Err(Error::Alignment(format!(
            "{name}: no IMU samples inside the ground-truth span [{gt_lo}, {gt_hi}] ns"
        )));
    };
    let secs = |ns: i64| (ns - origin) as f64 * 1e-9;
    let samples: Vec<ImuSample> = kept
        .iter()
        .map(|r| ImuSample {
            t: secs(r.ns),
            gyro: r.gyro,
            accel: r.accel,
        })
        .collect();
    let poses: Vec<GroundTruthPose> = gt
        .iter()
        .map(|&(ns, rotation)| GroundTruthPose { t: secs(ns), rotation })
        .collect();
    let query: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let traj = interpolate_gt(&poses, &query)?;
    Sequence::new(name, samples, traj)
}

/// Writes a recording in the EuRoC/TUM-VI directory layout under `dir/mav0`.
pub fn write_euroc(dir: &Path, format: DatasetFormat, imu: &[RawImuRow], gt: &[(i64, RotationMatrix)]) -> Result<()> {
    let root = dir.join("mav0");
    let imu_path = root.join("imu0").join("data.csv");
    let gt_path = root.join(format.gt_dir()).join("data.csv");
    for p in [&imu_path, &gt_path] {
        let parent = p.parent().expect("joined path has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }

    let write = |path: &Path, body: &mut dyn FnMut(&mut dyn Write) -> std::io::Result<()>| {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    };
    write(&imu_path, &mut |w| {
        writeln!(
            w,
            "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],\
             a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]"
        )?;
        for r in imu {
            let (g, a) = (r.gyro, r.accel);
            writeln!(w, "{},{},{},{},{},{},{}", r.ns, g.x, g.y, g.z, a.x, a.y, a.z)?;
        }
        Ok(())
    })?;
    write(&gt_path, &mut |w| {
        writeln!(
            w,
            "#timestamp [ns],p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z []"
        )?;
        for (ns, r) in gt {
            let [qw, qx, qy, qz] = r.to_quaternion();
            writeln!(w, "{ns},0,0,0,{qw},{qx},{qy},{qz}")?;
        }
        Ok(())
    })
}
