use nalgebra::Matrix3;

use super::{log_map, project_to_so3, RotationMatrix, Trajectory};
use crate::error::{Error, Result};

/// Constant rotation applied to the estimate before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    None,
    /// Best full SO(3) rotation.
    #[default]
    Full,
    /// Best rotation about the world z axis (gravity-aligned frames).
    YawOnly,
}

/// Chordal L2 mean: the rotation closest in Frobenius norm to `Σ mᵢ`.
pub fn chordal_mean(rotations: impl IntoIterator<Item = Matrix3<f64>>) -> RotationMatrix {
    let sum: Matrix3<f64> = rotations.into_iter().sum();
    RotationMatrix::from_matrix_unchecked(project_to_so3(&sum))
}

/// Absolute orientation error in degrees:
/// `sqrt(1/M Σ ‖log(R_nᵀ · R_align · R̃_n)‖²)` where `R_n` is ground truth,
/// `R̃_n` the estimate, and `R_align` the chordal mean of `R_n R̃_nᵀ`
/// (restricted per `alignment`).
pub fn aoe(est: &Trajectory, gt: &Trajectory, alignment: Alignment) -> Result<f64> {
    if est.len() != gt.len() {
        return Err(Error::InvalidArgument(format!(
            "trajectory lengths differ: {} vs {}",
            est.len(),
            gt.len()
        )));
    }
    if let Some(i) = est
        .timestamps()
        .iter()
        .zip(gt.timestamps())
        .position(|(a, b)| (a - b).abs() > 1e-6)
    {
        return Err(Error::InvalidArgument(format!(
            "timestamps differ at index {i}: {} vs {}",
            est.timestamps()[i],
            gt.timestamps()[i]
        )));
    }
    let offsets = || {
        gt.rotations()
            .iter()
            .zip(est.rotations())
            .map(|(g, e)| g.matrix() * e.matrix().transpose())
    };
    let align = match alignment {
        Alignment::None => Matrix3::identity(),
        Alignment::Full => *chordal_mean(offsets()).matrix(),
        Alignment::YawOnly => {
            let s: Matrix3<f64> = offsets().sum();
            let yaw = (s[(1, 0)] - s[(0, 1)]).atan2(s[(0, 0)] + s[(1, 1)]);
            *RotationMatrix::rot_z(yaw).matrix()
        }
    };
    let sum_sq: f64 = gt
        .rotations()
        .iter()
        .zip(est.rotations())
        .map(|(g, e)| log_map(&(g.matrix().transpose() * align * e.matrix())).norm_squared())
        .sum();
    Ok((sum_sq / gt.len() as f64).sqrt().to_degrees())
}
