use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::{exp_map, RotationMatrix};
use crate::error::{Error, Result};

/// Drift in `‖RᵀR − I‖_F` tolerated during integration before projecting.
const DRIFT_TOL: f64 = 1e-9;
const DRIFT_CHECK_EVERY: usize = 1000;

/// Time-stamped sequence of orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    rotations: Vec<RotationMatrix>,
}

impl Trajectory {
    pub fn new(timestamps: Vec<f64>, rotations: Vec<RotationMatrix>) -> Result<Self> {
        if timestamps.is_empty() || timestamps.len() != rotations.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs matching non-empty timestamps and rotations, got {} and {}",
                timestamps.len(),
                rotations.len()
            )));
        }
        check_increasing(&timestamps)?;
        Ok(Self { timestamps, rotations })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn rotations(&self) -> &[RotationMatrix] {
        &self.rotations
    }

    /// Sub-trajectory over `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.timestamps[range.clone()].to_vec(), self.rotations[range].to_vec())
    }

    /// Every orientation pre-multiplied by `q`.
    pub fn left_multiplied(&self, q: &RotationMatrix) -> Self {
        Self {
            timestamps: self.timestamps.clone(),
            rotations: self.rotations.iter().map(|r| q * r).collect(),
        }
    }
}

pub(crate) fn check_increasing(t: &[f64]) -> Result<()> {
    if let Some(bad) = t.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite timestamp at index {bad}")));
    }
    if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "timestamps not strictly increasing at index {}: {} then {}",
            i + 1,
            t[i],
            t[i + 1]
        )));
    }
    Ok(())
}

/// Open-loop attitude from angular velocity:
/// `R(n) = R(n−1) · exp(ω_n · (t_n − t_{n−1}))` with `R(0) = r0`.
///
/// `omega[0]` only fixes the length; the first increment uses `omega[1]`.
pub fn integrate_gyro(r0: &RotationMatrix, omega: &[Vector3<f64>], timestamps: &[f64]) -> Result<Trajectory> {
    if omega.len() != timestamps.len() || omega.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "omega has {} samples but there are {} timestamps",
            omega.len(),
            timestamps.len()
        )));
    }
    check_increasing(timestamps)?;
    let mut rotations = Vec::with_capacity(omega.len());
    let mut r = *r0;
    rotations.push(r);
    for n in 1..omega.len() {
        let dt = timestamps[n] - timestamps[n - 1];
        r = r * exp_map(&(omega[n] * dt));
        if n % DRIFT_CHECK_EVERY == 0 && r.orthonormality_error() > DRIFT_TOL {
            r = r.orthonormalized();
        }
        rotations.push(r);
    }
    Ok(Trajectory {
        timestamps: timestamps.to_vec(),
        rotations,
    })
}

/// Writes `timestamp_s,qw,qx,qy,qz` rows (Hamilton, w-first).
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "timestamp_s,qw,qx,qy,qz").map_err(io)?;
    for (t, r) in traj.timestamps.iter().zip(&traj.rotations) {
        let [qw, qx, qy, qz] = r.to_quaternion();
        writeln!(w, "{t},{qw},{qx},{qy},{qz}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
    let mut timestamps = Vec::new();
    let mut rotations = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if rec.len() != 5 {
            return Err(parse_err(format!("expected 5 columns, found {}", rec.len())));
        }
        let v = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        timestamps.push(v[0]);
        rotations.push(RotationMatrix::from_quaternion(v[1], v[2], v[3], v[4]).map_err(|e| parse_err(e.to_string()))?);
    }
    Trajectory::new(timestamps, rotations)
}
