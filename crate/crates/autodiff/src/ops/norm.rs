//! Per-channel batch normalisation over `[B, C, L]` arrays.

pub const BN_EPS: f64 = 1e-5;

/// Statistics of one training-mode batch, for running-average updates.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased (n - 1) variance, the convention used for running averages.
    pub var_unbiased: Vec<f64>,
}

/// Running mean/variance of a batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    /// `running = (1 - momentum) * running + momentum * batch`.
    pub fn update(&mut self, batch: &BatchStats, momentum: f64) {
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var_unbiased) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
    }
}

pub(crate) struct BnForward {
    pub out: Vec<f64>,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub stats: Option<BatchStats>,
}

/// `running` is used in eval mode; `None` selects batch statistics.
pub(crate) fn batchnorm_forward(
    (b, c, l): (usize, usize, usize),
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    running: Option<(&[f64], &[f64])>,
) -> BnForward {
    let n = (b * l) as f64;
    let (mean, var, stats) = match running {
        Some((rm, rv)) => (rm.to_vec(), rv.to_vec(), None),
        None => {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mut s = 0.0;
                for bi in 0..b {
                    s += x[(bi * c + ch) * l..][..l].iter().sum::<f64>();
                }
                let m = s / n;
                let mut ss = 0.0;
                for bi in 0..b {
                    ss += x[(bi * c + ch) * l..][..l]
                        .iter()
                        .map(|v| (v - m) * (v - m))
                        .sum::<f64>();
                }
                mean[ch] = m;
                var[ch] = ss / n;
            }
            let var_unbiased = var.iter().map(|v| v * n / (n - 1.0)).collect();
            let stats = BatchStats {
                mean: mean.clone(),
                var_unbiased,
            };
            (mean, var, Some(stats))
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for bi in 0..b {
        for ch in 0..c {
            let off = (bi * c + ch) * l;
            for i in off..off + l {
                let h = (x[i] - mean[ch]) * inv_std[ch];
                xhat[i] = h;
                out[i] = gamma[ch] * h + beta[ch];
            }
        }
    }
    BnForward {
        out,
        xhat,
        inv_std,
        stats,
    }
}

/// Returns `(d_x, d_gamma, d_beta)`.
pub(crate) fn batchnorm_backward(
    (b, c, l): (usize, usize, usize),
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    grad_out: &[f64],
    batch_stats: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = (b * l) as f64;
    let mut dx = vec![0.0; xhat.len()];
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
        for bi in 0..b {
            let off = (bi * c + ch) * l;
            for i in off..off + l {
                sum_dy += grad_out[i];
                sum_dy_xhat += grad_out[i] * xhat[i];
            }
        }
        dgamma[ch] = sum_dy_xhat;
        dbeta[ch] = sum_dy;
        let k = gamma[ch] * inv_std[ch];
        for bi in 0..b {
            let off = (bi * c + ch) * l;
            for i in off..off + l {
                dx[i] = if batch_stats {
                    k * (grad_out[i] - sum_dy / n - xhat[i] * sum_dy_xhat / n)
                } else {
                    k * grad_out[i]
                };
            }
        }
    }
    (dx, dgamma, dbeta)
}
