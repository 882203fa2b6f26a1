//! Learned gyroscope calibration and open-loop attitude estimation.
//!
//! - [`so3`]: rotation-group maps, gyro integration and the AOE metric.
//! - [`dataset`]: EuRoC / TUM-VI loaders, normalisation and windowing.
//! - [`synth`]: synthetic trajectories and the IMU error model.
//! - [`model`]: the LGC-Net network and calibration step.
//! - [`trainer`]: rotation-increment loss, training loop and evaluation.

pub mod dataset;
pub mod error;
pub mod model;
pub mod so3;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
