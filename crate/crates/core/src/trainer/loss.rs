//! Multi-horizon rotation-increment loss.
//!
//! For each horizon `t` the window is cut into disjoint strides
//! `[n, n + t]`. The estimated increment composes per-sample exponentials
//! `δR̃ = Π_{k=n+1}^{n+t} exp(ω̃_k dt_k)`, the reference is `δR = R_nᵀ R_{n+t}`,
//! and each stride contributes `Σ_i logcosh(log(δR δR̃ᵀ)_i)`. The total is
//! divided by the number of strides.
//!
//! The gradient is exact. With `P_k` the partial product up to sample `k`
//! and `φ = log(δR δR̃ᵀ)`,
//!
//! ```text
//! ∂φ/∂ω̃_k = −dt_k · J_r⁻¹(φ) · P_k · J_r(ω̃_k dt_k)
//! ```

use lgc_autodiff::{logcosh, logcosh_grad, CustomBackward, Graph, Tensor, Var};
use nalgebra::{Matrix3, Vector3};

use crate::dataset::Window;
use crate::error::{Error, Result};
use crate::so3::{exp_map, log_map, right_jacobian, right_jacobian_inv, RotationMatrix, Trajectory};

/// Unnormalised loss of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    pub sum: f64,
    pub count: usize,
    /// `∂sum/∂ω̃_k` when requested.
    pub grad: Option<Vec<Vector3<f64>>>,
}

pub fn check_horizons(horizons: &[usize], n: usize) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::InvalidArgument("at least one loss horizon is required".into()));
    }
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > n) {
        return Err(Error::InvalidArgument(format!(
            "loss horizon {h} outside [1, {n}] (window length)"
        )));
    }
    Ok(())
}

/// Loss terms of one window whose first `pad` samples are padding; strides
/// start at sample `pad`.
pub fn window_loss(
    omega: &[Vector3<f64>],
    t: &[f64],
    gt: &[RotationMatrix],
    horizons: &[usize],
    pad: usize,
    want_grad: bool,
) -> Result<LossTerms> {
    let n = omega.len();
    if t.len() != n || gt.len() != n {
        return Err(Error::InvalidArgument(format!(
            "increment loss needs equal lengths, got {n} rates, {} timestamps, {} poses",
            t.len(),
            gt.len()
        )));
    }
    check_horizons(horizons, n)?;
    let mut sum = 0.0;
    let mut count = 0;
    let mut grad = want_grad.then(|| vec![Vector3::zeros(); n]);
    let mut prefix: Vec<Matrix3<f64>> = Vec::new();
    let mut thetas: Vec<Vector3<f64>> = Vec::new();
    for &h in horizons {
        let mut start = pad;
        while start + h < n {
            thetas.clear();
            prefix.clear();
            let mut p = Matrix3::identity();
            for k in start + 1..=start + h {
                let theta = omega[k] * (t[k] - t[k - 1]);
                p *= exp_map(&theta).matrix();
                thetas.push(theta);
                prefix.push(p);
            }
            let reference = gt[start].matrix().transpose() * gt[start + h].matrix();
            let phi = log_map(&(reference * p.transpose()));
            sum += (0..3).map(|i| logcosh(phi[i])).sum::<f64>();
            count += 1;
            if let Some(grad) = grad.as_mut() {
                let g_phi = phi.map(logcosh_grad);
                let u = -(right_jacobian_inv(&phi).transpose() * g_phi);
                for (j, k) in (start + 1..=start + h).enumerate() {
                    let dt = t[k] - t[k - 1];
                    grad[k] += right_jacobian(&thetas[j]).transpose() * (prefix[j].transpose() * u) * dt;
                }
            }
            start += h;
        }
    }
    Ok(LossTerms { sum, count, grad })
}

/// Mean log-cosh increment loss of calibrated rates `omega` against `gt`.
pub fn increment_loss(omega: &[Vector3<f64>], gt: &Trajectory, horizons: &[usize]) -> Result<f64> {
    let terms = window_loss(omega, gt.timestamps(), gt.rotations(), horizons, 0, false)?;
    normalise(terms.sum, terms.count)
}

fn normalise(sum: f64, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "no complete increment fits in the window for any horizon".into(),
        ));
    }
    Ok(sum / count as f64)
}

struct CachedGrad(Vec<f64>);

impl CustomBackward for CachedGrad {
    fn backward(&self, _inputs: &[&Tensor], grad_output: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(self.0.iter().map(|g| g * grad_output[0]).collect())]
    }
}

/// Records the loss of a `[B, 3, N]` (or `[3, N]`) batch of calibrated
/// rates against `windows`, normalised by the total stride count.
pub fn increment_loss_node(g: &mut Graph, omega: Var, windows: &[&Window], horizons: &[usize]) -> Result<Var> {
    let shape = g.shape(omega).to_vec();
    let (b, n) = match shape.as_slice() {
        [3, n] => (1, *n),
        [b, 3, n] => (*b, *n),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "calibrated rates must be [3, N] or [B, 3, N], got {shape:?}"
            )))
        }
    };
    if windows.len() != b || windows.iter().any(|w| w.n != n) {
        return Err(Error::InvalidArgument(format!(
            "{} windows for a batch of {b} x {n} samples",
            windows.len()
        )));
    }
    let data = g.value(omega).data();
    let mut sum = 0.0;
    let mut count = 0;
    let mut grad = vec![0.0; data.len()];
    for (i, w) in windows.iter().enumerate() {
        let block = &data[i * 3 * n..(i + 1) * 3 * n];
        let om: Vec<Vector3<f64>> = (0..n)
            .map(|k| Vector3::new(block[k], block[n + k], block[2 * n + k]))
            .collect();
        let terms = window_loss(&om, w.timestamps(), w.gt.rotations(), horizons, w.pad, true)?;
        sum += terms.sum;
        count += terms.count;
        for (k, gk) in terms.grad.expect("requested").iter().enumerate() {
            for c in 0..3 {
                grad[i * 3 * n + c * n + k] = gk[c];
            }
        }
    }
    let loss = normalise(sum, count)?;
    let scale = 1.0 / count as f64;
    grad.iter_mut().for_each(|v| *v *= scale);
    Ok(g.custom(&[omega], Tensor::scalar(loss), Box::new(CachedGrad(grad))))
}
