use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INPUT_CHANNELS: usize = 6;
pub const OUTPUT_CHANNELS: usize = 3;

/// Network architecture. Serialised as flat `key = value` TOML.
///
/// The default is 4 depthwise-separable layers with channels
/// `[16, 32, 64, 128]`, kernel 7 and dilations `[1, 4, 16, 64]`, followed by
/// the attention block (kernel 5, then kernel 7 with dilation 3) and a
/// pointwise output layer: 30 968 trainable scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Samples per window.
    pub window: usize,
    pub channels: Vec<usize>,
    pub kernels: Vec<usize>,
    pub dilations: Vec<usize>,
    pub lka_enabled: bool,
    pub lka_kernel: usize,
    pub lka_dilated_kernel: usize,
    pub lka_dilation: usize,
    pub dropout: f64,
    pub output_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 16000,
            channels: vec![16, 32, 64, 128],
            kernels: vec![7; 4],
            dilations: vec![1, 4, 16, 64],
            lka_enabled: true,
            lka_kernel: 5,
            lka_dilated_kernel: 7,
            lka_dilation: 3,
            dropout: 0.1,
            output_channels: OUTPUT_CHANNELS,
        }
    }
}

impl ModelConfig {
    /// Small network for tests and quick synthetic runs.
    pub fn tiny(window: usize) -> Self {
        Self {
            window,
            channels: vec![4; 4],
            kernels: vec![3; 4],
            dilations: vec![1, 2, 4, 8],
            lka_kernel: 3,
            lka_dilated_kernel: 3,
            lka_dilation: 2,
            ..Self::default()
        }
    }

    pub fn layers(&self) -> usize {
        self.channels.len()
    }

    /// Channel count entering layer `i` (`i == layers()` is the block after
    /// the last layer).
    pub fn channels_in(&self, i: usize) -> usize {
        if i == 0 {
            INPUT_CHANNELS
        } else {
            self.channels[i - 1]
        }
    }

    pub fn feature_channels(&self) -> usize {
        self.channels_in(self.layers())
    }

    /// Output samples influenced by one input sample, including itself.
    pub fn receptive_field(&self) -> usize {
        let mut reach: usize = self.kernels.iter().zip(&self.dilations).map(|(k, d)| (k - 1) * d).sum();
        if self.lka_enabled {
            reach += (self.lka_kernel - 1) + (self.lka_dilated_kernel - 1) * self.lka_dilation;
        }
        reach + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.window < 2 {
            return bad(format!("window must be >= 2, got {}", self.window));
        }
        if self.kernels.len() != self.layers() || self.dilations.len() != self.layers() {
            return bad(format!(
                "channels, kernels and dilations need equal lengths, got {}, {}, {}",
                self.channels.len(),
                self.kernels.len(),
                self.dilations.len()
            ));
        }
        if let Some(c) = self.channels.iter().find(|&&c| c == 0) {
            return bad(format!("channel counts must be >= 1, got {c}"));
        }
        let mut kernels = self.kernels.clone();
        if self.lka_enabled {
            kernels.extend([self.lka_kernel, self.lka_dilated_kernel]);
        }
        if let Some(k) = kernels.iter().find(|&&k| k % 2 == 0) {
            return bad(format!("kernel lengths must be odd, got {k}"));
        }
        if self.dilations.iter().chain([&self.lka_dilation]).any(|&d| d == 0) {
            return bad("dilations must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.output_channels != OUTPUT_CHANNELS {
            return bad(format!(
                "output_channels must be {OUTPUT_CHANNELS} (one correction per gyro axis), got {}",
                self.output_channels
            ));
        }
        if self.receptive_field() > self.window {
            log::warn!(
                "receptive field {} exceeds window {}; early outputs see zero padding only",
                self.receptive_field(),
                self.window
            );
        }
        Ok(())
    }

    /// Trainable scalars: convolutions, batch-norm affine terms and the 3×3
    /// calibration matrix. Running statistics are not counted.
    pub fn param_count(&self) -> usize {
        let mut n = 9;
        for i in 0..self.layers() {
            let (cin, cout) = (self.channels_in(i), self.channels[i]);
            n += cin * self.kernels[i] + cin;
            n += 2 * cin;
            n += cout * cin + cout;
        }
        let c = self.feature_channels();
        if self.lka_enabled {
            n += self.lka_param_count();
        }
        n + self.output_channels * c + self.output_channels
    }

    pub fn lka_param_count(&self) -> usize {
        let c = self.feature_channels();
        (c * self.lka_kernel + c) + (c * self.lka_dilated_kernel + c) + (c * c + c)
    }
}
