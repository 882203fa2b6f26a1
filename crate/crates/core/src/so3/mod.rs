//! Rotation-group mathematics in `f64`.
//!
//! Rotations are 3×3 matrices ([`RotationMatrix`]); tangent vectors are
//! axis-angle vectors ([`RotVec`]). The exponential map is Rodrigues'
//! formula, switching to series coefficients below [`SMALL_ANGLE`]; the
//! logarithm recovers the axis from the symmetric part of `R` once the angle
//! is within [`NEAR_PI`] of π, where the sine formula breaks down.

mod metrics;
pub(crate) mod trajectory;

pub use metrics::{aoe, chordal_mean, Alignment};
pub use trajectory::{integrate_gyro, read_trajectory_csv, write_trajectory_csv, Trajectory};

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this angle the exponential and Jacobians use Taylor coefficients.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Above `π - NEAR_PI` the logarithm takes the symmetric-part branch.
pub const NEAR_PI: f64 = 1e-6;

/// Deviation from orthonormality that [`RotationMatrix::new`] repairs.
const REPAIR_TOL: f64 = 1e-3;

/// Axis-angle rotation vector in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotVec(pub Vector3<f64>);

impl RotVec {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zeros() -> Self {
        Self(Vector3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vector3<f64>> for RotVec {
    fn from(v: Vector3<f64>) -> Self {
        Self(v)
    }
}

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Accepts `m` if it is orthonormal with positive determinant to within
    /// `1e-3`, projecting it back onto SO(3) when it is off by more than
    /// round-off.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entries".into()));
        }
        let err = orthonormality_error(&m);
        let det = m.determinant();
        if err > REPAIR_TOL || (det - 1.0).abs() > REPAIR_TOL {
            return Err(Error::InvalidRotation(format!(
                "|R^T R - I| = {err:.3e}, det = {det:.6}"
            )));
        }
        if err > 1e-12 {
            Ok(Self(project_to_so3(&m)))
        } else {
            Ok(Self(m))
        }
    }

    /// Wraps `m` without any checks.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// From a Hamilton quaternion `(w, x, y, z)`; normalised first.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidRotation(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalised"
            )));
        }
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        Ok(Self(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )))
    }

    /// Hamilton quaternion `[w, x, y, z]` with `w >= 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let m = &self.0;
        let tr = m.trace();
        // Shepperd: pivot on the largest of (w, x, y, z).
        let q = if tr > m[(0, 0)] && tr > m[(1, 1)] && tr > m[(2, 2)] {
            let s = 2.0 * (1.0 + tr).sqrt();
            [
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            ]
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            [
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            ]
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            [
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            ]
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            [
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            ]
        };
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        q.map(|v| sign * v / n)
    }

    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`, angles in radians.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        Self(Matrix3::new(
            cy * cp,
            cy * sp * sr - sy * cr,
            cy * sp * cr + sy * sr,
            sy * cp,
            sy * sp * sr + cy * cr,
            sy * sp * cr - cy * sr,
            -sp,
            cp * sr,
            cp * cr,
        ))
    }

    /// `(roll, pitch, yaw)` in radians for the intrinsic Z-Y-X convention.
    pub fn to_euler_zyx(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }

    pub fn rot_z(angle: f64) -> Self {
        exp_map(&Vector3::new(0.0, 0.0, angle))
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn orthonormalized(&self) -> Self {
        Self(project_to_so3(&self.0))
    }

    /// Angle of the rotation in `[0, π]`.
    pub fn angle(&self) -> f64 {
        log_map(&self.0).norm()
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Mul<&RotationMatrix> for &RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// `‖RᵀR − I‖_F`.
pub fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

/// Closest rotation to `m` via SVD, with the reflection case folded away.
pub(crate) fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

/// Cross-product matrix: `hat(v) * w == v × w`.
pub fn hat(v: &RotVec) -> Result<Matrix3<f64>> {
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite rotation vector {:?}", v.0)));
    }
    Ok(skew(&v.0))
}

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rodrigues' formula.
pub fn exp_so3(theta: &RotVec) -> Result<RotationMatrix> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite rotation vector {:?}",
            theta.0
        )));
    }
    Ok(exp_map(&theta.0))
}

/// Unchecked exponential for hot loops.
pub(crate) fn exp_map(theta: &Vector3<f64>) -> RotationMatrix {
    let t2 = theta.norm_squared();
    let t = t2.sqrt();
    let (a, b) = if t < SMALL_ANGLE {
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (t.sin() / t, (1.0 - t.cos()) / t2)
    };
    let k = skew(theta);
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Logarithm map with angle in `[0, π]`.
///
/// Fails if `R` is further than `1e-3` from SO(3); smaller deviations are
/// projected away first.
pub fn log_so3(r: &RotationMatrix) -> Result<RotVec> {
    let r = RotationMatrix::new(r.0)?;
    Ok(RotVec(log_map(&r.0)))
}

pub(crate) fn log_map(m: &Matrix3<f64>) -> Vector3<f64> {
    // v = sin(θ) · axis
    let v = vee(&(m - m.transpose())) * 0.5;
    let s = v.norm();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = s.atan2(c);
    if theta < SMALL_ANGLE {
        return v * (1.0 + theta * theta / 6.0);
    }
    if theta < PI - NEAR_PI {
        return v * (theta / s);
    }
    // Near π: read the axis off the symmetric part, B = (R + I)/2 ≈ a aᵀ.
    let b = (m + Matrix3::identity()) * 0.5;
    let half_1m = (1.0 - c) * 0.5;
    let half_1p = (1.0 + c) * 0.5;
    let i = (0..3).max_by(|&p, &q| b[(p, p)].total_cmp(&b[(q, q)])).unwrap();
    let ai = ((b[(i, i)] - half_1p) / half_1m).max(0.0).sqrt();
    let mut axis = Vector3::zeros();
    axis[i] = ai;
    for j in (0..3).filter(|&j| j != i) {
        axis[j] = (b[(i, j)] + b[(j, i)]) * 0.5 / (half_1m * ai);
    }
    axis.normalize_mut();
    if axis.dot(&v) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Right Jacobian of the exponential: `exp(θ + δ) ≈ exp(θ) exp(J_r(θ) δ)`.
pub fn right_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let t2 = theta.norm_squared();
    let t = t2.sqrt();
    let (a, b) = if t < 1e-4 {
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        ((1.0 - t.cos()) / t2, (t - t.sin()) / (t2 * t))
    };
    let k = skew(theta);
    Matrix3::identity() - k * a + k * k * b
}

/// Inverse of [`right_jacobian`]: `log(exp(φ) exp(δ)) ≈ φ + J_r⁻¹(φ) δ`.
pub fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t2 = phi.norm_squared();
    let t = t2.sqrt();
    let c = if t < 1e-4 {
        1.0 / 12.0 + t2 / 720.0
    } else {
        1.0 / t2 - (1.0 + t.cos()) / (2.0 * t * t.sin())
    };
    let k = skew(phi);
    Matrix3::identity() + k * 0.5 + k * k * c
}

/// `R_nᵀ R_{n+t}`: the rotation taking frame `n` to frame `n+t`.
pub fn relative_increment(r_n: &RotationMatrix, r_nt: &RotationMatrix) -> RotationMatrix {
    RotationMatrix(r_n.0.transpose() * r_nt.0)
}
