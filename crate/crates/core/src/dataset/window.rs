use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{NormStats, Sequence};
use crate::error::{Error, Result};
use crate::so3::Trajectory;

/// Fixed-length training/inference window.
///
/// `data` is channel-major `[6][n]` normalised input, `raw_gyro` is `[3][n]`
/// in rad/s. The first `pad` samples are synthetic left padding: zero data,
/// the first pose repeated and timestamps extrapolated backwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub n: usize,
    pub pad: usize,
    /// Index in the source sequence of the first non-padded sample.
    pub start: usize,
    pub data: Vec<f64>,
    pub raw_gyro: Vec<f64>,
    pub gt: Trajectory,
}

impl Window {
    pub fn gyro_at(&self, k: usize) -> [f64; 3] {
        [
            self.raw_gyro[k],
            self.raw_gyro[self.n + k],
            self.raw_gyro[2 * self.n + k],
        ]
    }

    pub fn timestamps(&self) -> &[f64] {
        self.gt.timestamps()
    }

    /// Builds one window from `seq[start..start + n - pad]`.
    pub fn from_sequence(seq: &Sequence, stats: &NormStats, start: usize, n: usize, pad: usize) -> Result<Self> {
        let real = n - pad;
        if start + real > seq.len() {
            return Err(Error::InvalidArgument(format!(
                "window [{start}, {}) exceeds sequence length {}",
                start + real,
                seq.len()
            )));
        }
        let mut data = vec![0.0; 6 * n];
        let mut raw_gyro = vec![0.0; 3 * n];
        for (k, s) in seq.imu()[start..start + real].iter().enumerate() {
            let x = stats.normalize(s.channels());
            for c in 0..6 {
                data[c * n + pad + k] = x[c];
            }
            for c in 0..3 {
                raw_gyro[c * n + pad + k] = s.gyro[c];
            }
        }
        let ts = seq.timestamps();
        let rots = seq.gt().rotations();
        let dt = seq.median_dt().unwrap_or(0.005);
        let mut t = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for k in 0..pad {
            t.push(ts[start] - (pad - k) as f64 * dt);
            r.push(rots[start]);
        }
        t.extend_from_slice(&ts[start..start + real]);
        r.extend_from_slice(&rots[start..start + real]);
        Ok(Window {
            n,
            pad,
            start,
            data,
            raw_gyro,
            gt: Trajectory::new(t, r)?,
        })
    }
}

/// Cuts `seq` into windows of `n` samples every `stride` samples. A sequence
/// shorter than `n` yields one left-padded window.
pub fn make_windows(seq: &Sequence, stats: &NormStats, n: usize, stride: usize) -> Result<Vec<Window>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("window length must be >= 2, got {n}")));
    }
    if stride < 1 {
        return Err(Error::InvalidArgument("window stride must be >= 1".into()));
    }
    if seq.is_empty() {
        return Err(Error::InvalidArgument(format!("sequence {} is empty", seq.name)));
    }
    if seq.len() < n {
        return Ok(vec![Window::from_sequence(seq, stats, 0, n, n - seq.len())?]);
    }
    (0..=seq.len() - n)
        .step_by(stride)
        .map(|s| Window::from_sequence(seq, stats, s, n, 0))
        .collect()
}

/// Adds zero-mean Gaussian noise with per-channel `std` to the normalised
/// channels of the non-padded samples.
pub fn augment(window: &Window, std: &[f64; 6], seed: u64) -> Window {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = window.clone();
    let n = window.n;
    for (c, s) in std.iter().enumerate() {
        for k in window.pad..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            out.data[c * n + k] += s * z;
        }
    }
    out
}
