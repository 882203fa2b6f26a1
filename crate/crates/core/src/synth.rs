//! Synthetic attitude trajectories and a low-cost IMU error model.
//!
//! Measurements follow
//!
//! ```text
//! ω̂ = Sω·Mω·ω + C×·a + b_ω + η_ω
//! â = Sa·Ma·a + b_a + η_a
//! ```
//!
//! with `a` the specific force in the body frame.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_euroc, DatasetFormat, ImuSample, RawImuRow, Sequence};
use crate::error::{Error, Result};
use crate::so3::{integrate_gyro, RotationMatrix, Trajectory};

pub const GRAVITY: f64 = 9.81;

type Mat = [[f64; 3]; 3];

const IDENTITY: Mat = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn uniform3(rng: &mut ChaCha8Rng, s: f64) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(-s..s))
}

fn perturbed(rng: &mut ChaCha8Rng, base: Mat, s: f64) -> Mat {
    base.map(|row| row.map(|v| v + rng.random_range(-s..s)))
}

fn to_na(m: &Mat) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

/// Deterministic sensor errors plus noise levels. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModel {
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    /// Combined scale and misalignment `Sω·Mω`.
    pub gyro_scale_misalign: Mat,
    pub accel_scale_misalign: Mat,
    /// g-sensitivity, (rad/s) per (m/s²).
    pub g_sensitivity: Mat,
    pub gyro_noise_std: f64,
    pub accel_noise_std: f64,
    /// Gyro bias random walk, rad/s/√s. Zero disables it.
    #[serde(default)]
    pub bias_random_walk_std: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ErrorModel {
    /// No errors at all: measurements equal the truth.
    pub fn ideal() -> Self {
        Self {
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
            gyro_scale_misalign: IDENTITY,
            accel_scale_misalign: IDENTITY,
            g_sensitivity: [[0.0; 3]; 3],
            gyro_noise_std: 0.0,
            accel_noise_std: 0.0,
            bias_random_walk_std: 0.0,
        }
    }

    /// A random consumer-grade error model: biases up to 0.02 rad/s and
    /// 0.1 m/s², scale/misalignment within 3%, g-sensitivity up to 1e-3.
    pub fn random_low_cost(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gyro_bias = uniform3(&mut rng, 0.02);
        let accel_bias = uniform3(&mut rng, 0.1);
        Self {
            gyro_bias,
            accel_bias,
            gyro_scale_misalign: perturbed(&mut rng, IDENTITY, 0.03),
            accel_scale_misalign: perturbed(&mut rng, IDENTITY, 0.03),
            g_sensitivity: perturbed(&mut rng, [[0.0; 3]; 3], 1e-3),
            gyro_noise_std: 1.7e-4 * 200f64.sqrt(),
            accel_noise_std: 2.0e-3 * 200f64.sqrt(),
            bias_random_walk_std: 0.0,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.gyro_noise_std = 0.0;
        self.accel_noise_std = 0.0;
        self.bias_random_walk_std = 0.0;
        self
    }

    /// Checks the low-cost regime: scale/misalignment matrices within 10% of
    /// identity element-wise, non-negative finite noise levels.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("gyro_scale_misalign", &self.gyro_scale_misalign),
            ("accel_scale_misalign", &self.accel_scale_misalign),
        ] {
            for i in 0..3 {
                for j in 0..3 {
                    let d = (m[i][j] - IDENTITY[i][j]).abs();
                    if d.is_nan() || d > 0.1 {
                        return Err(Error::InvalidModel(format!(
                            "{name}[{i}][{j}] = {} is not within 0.1 of identity",
                            m[i][j]
                        )));
                    }
                }
            }
        }
        let finite = self
            .gyro_bias
            .iter()
            .chain(&self.accel_bias)
            .chain(self.g_sensitivity.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite bias or g-sensitivity".into()));
        }
        for (name, s) in [
            ("gyro_noise_std", self.gyro_noise_std),
            ("accel_noise_std", self.accel_noise_std),
            ("bias_random_walk_std", self.bias_random_walk_std),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ErrorModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("plain numbers serialise");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MotionProfile {
    Static,
    /// Constant body rate, rad/s.
    ConstantRate {
        omega: [f64; 3],
    },
    /// `ω_i(t) = amplitude_i · sin(2π · frequency_i · t)`.
    Sinusoidal {
        amplitude: [f64; 3],
        frequency_hz: [f64; 3],
    },
    /// Sum of 3–5 random sinusoids per axis below 2 Hz, peak rate
    /// `max_rate` rad/s.
    RandomSmooth {
        max_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthScenario {
    pub duration: f64,
    pub rate: f64,
    pub profile: MotionProfile,
    pub seed: u64,
}

impl SynthScenario {
    /// `round(duration·rate) + 1` samples at `k / rate`.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.rate).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite() && self.duration.is_finite()) || self.duration * self.rate < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "scenario needs duration*rate >= 2, got {} s at {} Hz",
                self.duration, self.rate
            )));
        }
        Ok(())
    }
}

/// Ground truth of a synthetic run.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub trajectory: Trajectory,
    pub omega: Vec<Vector3<f64>>,
    /// Specific force in the body frame, m/s².
    pub accel: Vec<Vector3<f64>>,
}

struct Sines {
    amp: Vec<f64>,
    freq: Vec<f64>,
    phase: Vec<f64>,
}

impl Sines {
    fn random(rng: &mut ChaCha8Rng, peak: f64) -> Self {
        let k = rng.random_range(3..=5);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = w.iter().sum();
        Sines {
            amp: w.iter().map(|x| peak * x / total).collect(),
            freq: (0..k).map(|_| rng.random_range(0.05..2.0)).collect(),
            phase: (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
        }
    }

    fn at(&self, t: f64) -> f64 {
        (0..self.amp.len())
            .map(|i| self.amp[i] * (2.0 * PI * self.freq[i] * t + self.phase[i]).sin())
            .sum()
    }
}

/// Body rates, the attitude they integrate to (starting at identity) and
/// the body-frame specific force including gravity.
pub fn generate_truth(scenario: &SynthScenario) -> Result<Truth> {
    scenario.validate()?;
    let n = scenario.sample_count();
    let t: Vec<f64> = (0..n).map(|k| k as f64 / scenario.rate).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let (omega, lin): (Vec<Vector3<f64>>, Vec<Vector3<f64>>) = match &scenario.profile {
        MotionProfile::Static => (vec![Vector3::zeros(); n], vec![Vector3::zeros(); n]),
        MotionProfile::ConstantRate { omega } => {
            let w = Vector3::from(*omega);
            (vec![w; n], vec![Vector3::zeros(); n])
        }
        MotionProfile::Sinusoidal {
            amplitude,
            frequency_hz,
        } => {
            let om = t
                .iter()
                .map(|&x| Vector3::from_fn(|i, _| amplitude[i] * (2.0 * PI * frequency_hz[i] * x).sin()))
                .collect();
            let acc = t
                .iter()
                .map(|&x| Vector3::from_fn(|i, _| 0.5 * (2.0 * PI * frequency_hz[i] * x).cos()))
                .collect();
            (om, acc)
        }
        MotionProfile::RandomSmooth { max_rate } => {
            let rot: Vec<Sines> = (0..3).map(|_| Sines::random(&mut rng, *max_rate)).collect();
            let acc: Vec<Sines> = (0..3).map(|_| Sines::random(&mut rng, 1.0)).collect();
            (
                t.iter().map(|&x| Vector3::from_fn(|i, _| rot[i].at(x))).collect(),
                t.iter().map(|&x| Vector3::from_fn(|i, _| acc[i].at(x))).collect(),
            )
        }
    };

    let trajectory = integrate_gyro(&RotationMatrix::identity(), &omega, &t)?;
    let up = Vector3::new(0.0, 0.0, GRAVITY);
    let accel = trajectory
        .rotations()
        .iter()
        .zip(&lin)
        .map(|(r, a)| r.matrix().transpose() * (a + up))
        .collect();
    Ok(Truth {
        trajectory,
        omega,
        accel,
    })
}

/// Applies `model` to true rates and specific forces sampled at `times`.
pub fn corrupt(
    times: &[f64],
    omega: &[Vector3<f64>],
    accel: &[Vector3<f64>],
    model: &ErrorModel,
    seed: u64,
) -> Result<Vec<ImuSample>> {
    if omega.len() != times.len() || accel.len() != times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} timestamps, {} rates, {} accelerations",
            times.len(),
            omega.len(),
            accel.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal3 = move || -> Vector3<f64> { Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng)) };
    let mw = to_na(&model.gyro_scale_misalign);
    let ma = to_na(&model.accel_scale_misalign);
    let cg = to_na(&model.g_sensitivity);
    let ba = Vector3::from(model.accel_bias);
    let mut bw = Vector3::from(model.gyro_bias);

    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let (eta_w, eta_a, walk) = (normal3(), normal3(), normal3());
        if k > 0 && model.bias_random_walk_std > 0.0 {
            bw += walk * (model.bias_random_walk_std * (times[k] - times[k - 1]).sqrt());
        }
        let gyro = mw * omega[k] + cg * accel[k] + bw + eta_w * model.gyro_noise_std;
        let acc = ma * accel[k] + ba + eta_a * model.accel_noise_std;
        out.push(ImuSample {
            t: times[k],
            gyro,
            accel: acc,
        });
    }
    Ok(out)
}

/// Exact compensation with a known model (noise ignored): recovers the
/// specific force first, then the body rate.
pub fn ideal_inverse(measured: &[ImuSample], model: &ErrorModel) -> Result<Vec<Vector3<f64>>> {
    let inv = |m: &Mat, name: &str| {
        let m = to_na(m);
        let det = m.determinant();
        if det.is_nan() || det.abs() <= 1e-12 {
            return Err(Error::InvalidModel(format!("{name} is singular (det {det:e})")));
        }
        m.try_inverse()
            .ok_or_else(|| Error::InvalidModel(format!("{name} is singular")))
    };
    let mw_inv = inv(&model.gyro_scale_misalign, "gyro_scale_misalign")?;
    let ma_inv = inv(&model.accel_scale_misalign, "accel_scale_misalign")?;
    let cg = to_na(&model.g_sensitivity);
    let ba = Vector3::from(model.accel_bias);
    let bw = Vector3::from(model.gyro_bias);
    Ok(measured
        .iter()
        .map(|s| {
            let a = ma_inv * (s.accel - ba);
            mw_inv * (s.gyro - cg * a - bw)
        })
        .collect())
}

/// Truth plus corrupted measurements as a [`Sequence`].
pub fn synthesize(
    name: &str,
    scenario: &SynthScenario,
    model: &ErrorModel,
    noise_seed: u64,
) -> Result<(Sequence, Truth)> {
    model.validate()?;
    let truth = generate_truth(scenario)?;
    let times = truth.trajectory.timestamps().to_vec();
    let imu = corrupt(&times, &truth.omega, &truth.accel, model, noise_seed)?;
    let seq = Sequence::new(name, imu, truth.trajectory.clone())?;
    Ok((seq, truth))
}

/// Writes `seq` in the EuRoC directory layout; seconds become integer ns.
pub fn write_sequence(dir: &Path, seq: &Sequence) -> Result<()> {
    let ns = |t: f64| (t * 1e9).round() as i64;
    let imu: Vec<RawImuRow> = seq
        .imu()
        .iter()
        .map(|s| RawImuRow {
            ns: ns(s.t),
            gyro: s.gyro,
            accel: s.accel,
        })
        .collect();
    let gt: Vec<(i64, RotationMatrix)> = seq
        .timestamps()
        .iter()
        .zip(seq.gt().rotations())
        .map(|(&t, &r)| (ns(t), r))
        .collect();
    write_euroc(dir, DatasetFormat::Euroc, &imu, &gt)
}
