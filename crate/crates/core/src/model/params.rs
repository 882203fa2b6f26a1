use std::path::Path;

use indexmap::IndexMap;
use lgc_autodiff::{checkpoint, BatchStats, RunningStats, Tensor};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};

pub const CALIB: &str = "calib.c_omega";
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// `U(-1/√fan_in, 1/√fan_in)`.
    Uniform {
        fan_in: usize,
    },
    Zeros,
    Ones,
    Identity,
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    shape: Vec<usize>,
    init: Init,
    decay: bool,
}

fn conv_slots(out: &mut Vec<Slot>, prefix: &str, c_out: usize, c_in_per_group: usize, k: usize, zero: bool) {
    let fan_in = c_in_per_group * k;
    let init = if zero { Init::Zeros } else { Init::Uniform { fan_in } };
    out.push(Slot {
        name: format!("{prefix}.weight"),
        shape: vec![c_out, c_in_per_group, k],
        init,
        decay: true,
    });
    out.push(Slot {
        name: format!("{prefix}.bias"),
        shape: vec![c_out],
        init,
        decay: false,
    });
}

/// Trainable tensors in a fixed order, then running-stat buffers.
fn layout(cfg: &ModelConfig) -> (Vec<Slot>, Vec<Slot>) {
    let mut p = Vec::new();
    let mut b = Vec::new();
    for i in 0..cfg.layers() {
        let (cin, cout) = (cfg.channels_in(i), cfg.channels[i]);
        conv_slots(&mut p, &format!("dsc{i}.dw"), cin, 1, cfg.kernels[i], false);
        for (name, init) in [("gamma", Init::Ones), ("beta", Init::Zeros)] {
            p.push(Slot {
                name: format!("dsc{i}.bn.{name}"),
                shape: vec![cin],
                init,
                decay: false,
            });
        }
        for (name, init) in [("running_mean", Init::Zeros), ("running_var", Init::Ones)] {
            b.push(Slot {
                name: format!("dsc{i}.bn.{name}"),
                shape: vec![cin],
                init,
                decay: false,
            });
        }
        conv_slots(&mut p, &format!("dsc{i}.pw"), cout, cin, 1, false);
    }
    let c = cfg.feature_channels();
    if cfg.lka_enabled {
        conv_slots(&mut p, "lka.dw", c, 1, cfg.lka_kernel, false);
        conv_slots(&mut p, "lka.dwd", c, 1, cfg.lka_dilated_kernel, false);
        conv_slots(&mut p, "lka.pw", c, c, 1, false);
    }
    conv_slots(&mut p, "out", cfg.output_channels, c, 1, true);
    p.push(Slot {
        name: CALIB.into(),
        shape: vec![3, 3],
        init: Init::Identity,
        decay: false,
    });
    (p, b)
}

fn name_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a, so each tensor's draw is independent of which others exist.
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    seed ^ h
}

fn materialise(slot: &Slot, seed: u64) -> Tensor {
    match slot.init {
        Init::Zeros => Tensor::zeros(&slot.shape),
        Init::Ones => Tensor::full(&slot.shape, 1.0),
        Init::Identity => Tensor::from_fn(&slot.shape, |i| if i % 4 == 0 { 1.0 } else { 0.0 }),
        Init::Uniform { fan_in } => {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(name_seed(seed, &slot.name));
            Tensor::from_fn(&slot.shape, |_| rng.random_range(-bound..bound))
        }
    }
}

/// All weights of one network plus its batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    trainable: IndexMap<String, Tensor>,
    decay: Vec<bool>,
    buffers: IndexMap<String, Tensor>,
}

impl ModelParams {
    /// Random hidden layers, zero output layer (so the initial correction is
    /// zero) and identity calibration matrix.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (p, b) = layout(config);
        Ok(Self {
            config: config.clone(),
            decay: p.iter().map(|s| s.decay).collect(),
            trainable: p.iter().map(|s| (s.name.clone(), materialise(s, seed))).collect(),
            buffers: b.iter().map(|s| (s.name.clone(), materialise(s, seed))).collect(),
        })
    }

    /// Every convolution weight and bias zero: the network outputs zero and
    /// calibration reduces to `C_ω · ω̂`.
    pub fn zero_network(config: &ModelConfig) -> Result<Self> {
        let mut p = Self::init(config, 0)?;
        for (name, t) in p.trainable.iter_mut() {
            if name.ends_with(".weight") || name.ends_with(".bias") {
                t.data_mut().fill(0.0);
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn trainable(&self) -> &IndexMap<String, Tensor> {
        &self.trainable
    }

    pub fn buffers(&self) -> &IndexMap<String, Tensor> {
        &self.buffers
    }

    /// Whether weight decay applies, aligned with [`Self::trainable`].
    pub fn decay_flags(&self) -> &[bool] {
        &self.decay
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.trainable.get(name).or_else(|| self.buffers.get(name))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        match self.trainable.get_mut(name) {
            Some(t) => Some(t),
            None => self.buffers.get_mut(name),
        }
    }

    pub fn trainable_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.trainable.values_mut()
    }

    pub fn param_count(&self) -> usize {
        self.trainable.values().map(Tensor::len).sum()
    }

    pub fn c_omega(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(self.trainable[CALIB].data())
    }

    pub fn set_c_omega(&mut self, c: &Matrix3<f64>) {
        let t = self
            .trainable
            .get_mut(CALIB)
            .expect("calibration matrix always present");
        for i in 0..3 {
            for j in 0..3 {
                t.data_mut()[3 * i + j] = c[(i, j)];
            }
        }
    }

    pub fn running_stats(&self, layer: usize) -> (&[f64], &[f64]) {
        (
            self.buffers[&format!("dsc{layer}.bn.running_mean")].data(),
            self.buffers[&format!("dsc{layer}.bn.running_var")].data(),
        )
    }

    /// Folds one training batch's statistics into layer `layer`'s running
    /// averages.
    pub fn update_running_stats(&mut self, layer: usize, batch: &BatchStats) {
        let (m, v) = self.running_stats(layer);
        let mut rs = RunningStats {
            mean: m.to_vec(),
            var: v.to_vec(),
        };
        rs.update(batch, BN_MOMENTUM);
        self.buffers[&format!("dsc{layer}.bn.running_mean")]
            .data_mut()
            .copy_from_slice(&rs.mean);
        self.buffers[&format!("dsc{layer}.bn.running_var")]
            .data_mut()
            .copy_from_slice(&rs.var);
    }

    /// First non-finite tensor name, if any.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.trainable
            .iter()
            .chain(&self.buffers)
            .find(|(_, t)| !t.is_finite())
            .map(|(n, _)| n.as_str())
    }

    pub fn to_tensors(&self) -> IndexMap<String, Tensor> {
        self.trainable
            .iter()
            .chain(&self.buffers)
            .map(|(n, t)| (n.clone(), t.clone()))
            .collect()
    }

    /// Rebuilds parameters for `config` from named tensors, requiring exactly
    /// the expected names and shapes.
    pub fn from_tensors(config: &ModelConfig, mut tensors: IndexMap<String, Tensor>) -> Result<Self> {
        let mut p = Self::init(config, 0)?;
        for (name, slot) in p.trainable.iter_mut().chain(p.buffers.iter_mut()) {
            let t = tensors
                .shift_remove(name)
                .ok_or_else(|| Error::InvalidModel(format!("checkpoint is missing {name}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::InvalidModel(format!(
                    "{name}: checkpoint shape {:?} does not match configured {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::InvalidModel(format!(
                "checkpoint has {extra}, which the configured model does not use"
            )));
        }
        if let Some(bad) = p.first_non_finite() {
            return Err(Error::InvalidModel(format!("{bad} contains non-finite values")));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(checkpoint::save(path, &self.to_tensors())?)
    }

    pub fn load(path: &Path, config: &ModelConfig) -> Result<Self> {
        Self::from_tensors(config, checkpoint::load(path)?)
    }
}
