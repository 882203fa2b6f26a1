//! The calibration network.
//!
//! ```text
//! x[6,N] → DSC₀ → … → DSC₃ → LKA → pointwise → δ[3,N]
//! ω̃ = C_ω · ω̂ + δ
//! ```
//!
//! Each DSC layer is depthwise conv → batch norm → GELU → pointwise conv →
//! dropout. The LKA block multiplies its input by an attention map built from
//! a depthwise conv, a dilated depthwise conv and a pointwise conv. Every
//! convolution is causal.

mod config;
mod params;

pub use config::{ModelConfig, INPUT_CHANNELS, OUTPUT_CHANNELS};
pub use params::{ModelParams, BN_MOMENTUM, CALIB};

use indexmap::IndexMap;
use lgc_autodiff::{BatchStats, Conv1dSpec, Graph, Mode, Tensor, Var};
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Parameters recorded in a [`Graph`], by name.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    /// Records every trainable tensor of `params`, as a differentiable
    /// parameter when `trainable` or as a constant otherwise.
    pub fn new(g: &mut Graph, params: &ModelParams, trainable: bool) -> Self {
        let vars = params
            .trainable()
            .iter()
            .map(|(n, t)| {
                let v = if trainable {
                    g.param(t.clone())
                } else {
                    g.input(t.clone())
                };
                (n.clone(), v)
            })
            .collect();
        Self { vars }
    }

    pub fn get(&self, name: &str) -> Var {
        self.vars[name]
    }

    /// Variables in the same order as [`ModelParams::trainable`].
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars.values().copied()
    }
}

/// Dropout mask seed of DSC layer `layer` for forward seed `seed`.
pub fn dropout_seed(seed: u64, layer: usize) -> u64 {
    seed ^ (layer as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// One depthwise-separable layer. Returns the batch statistics in train
/// mode so the caller can update the running averages.
pub fn dsc_layer(
    g: &mut Graph,
    bound: &Bound,
    params: &ModelParams,
    layer: usize,
    x: Var,
    mode: Mode,
    seed: u64,
) -> Result<(Var, Option<BatchStats>)> {
    let cfg = params.config();
    let p = |s: &str| bound.get(&format!("dsc{layer}.{s}"));
    let cin = cfg.channels_in(layer);
    let dw = g.conv1d(
        x,
        p("dw.weight"),
        Some(p("dw.bias")),
        Conv1dSpec::causal(cin, cfg.dilations[layer]),
    )?;
    let (bn, stats) = g.batchnorm1d(dw, p("bn.gamma"), p("bn.beta"), params.running_stats(layer), mode)?;
    let act = g.gelu(bn);
    let pw = g.conv1d(act, p("pw.weight"), Some(p("pw.bias")), Conv1dSpec::pointwise())?;
    let out = g.dropout(pw, cfg.dropout, mode, dropout_seed(seed, layer))?;
    Ok((out, stats))
}

/// `F ⊙ pw(dwd(dw(F)))`.
pub fn lka_block(g: &mut Graph, bound: &Bound, params: &ModelParams, f: Var) -> Result<Var> {
    let cfg = params.config();
    let c = cfg.feature_channels();
    let dw = g.conv1d(
        f,
        bound.get("lka.dw.weight"),
        Some(bound.get("lka.dw.bias")),
        Conv1dSpec::causal(c, 1),
    )?;
    let dwd = g.conv1d(
        dw,
        bound.get("lka.dwd.weight"),
        Some(bound.get("lka.dwd.bias")),
        Conv1dSpec::causal(c, cfg.lka_dilation),
    )?;
    let att = g.conv1d(
        dwd,
        bound.get("lka.pw.weight"),
        Some(bound.get("lka.pw.bias")),
        Conv1dSpec::pointwise(),
    )?;
    Ok(g.mul(att, f)?)
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Gyro correction, `[3, N]` or `[B, 3, N]`, rad/s.
    pub delta: Var,
    /// Output of the last DSC layer.
    pub features: Var,
    /// Per-layer batch statistics (train mode only).
    pub batch_stats: Vec<BatchStats>,
}

/// Runs the network on normalised input `x` of shape `[6, N]` or
/// `[B, 6, N]`.
pub fn forward(
    g: &mut Graph,
    bound: &Bound,
    params: &ModelParams,
    x: Var,
    mode: Mode,
    seed: u64,
) -> Result<ForwardOutput> {
    let shape = g.shape(x);
    let channels = shape.len().checked_sub(2).map(|i| shape[i]);
    if !(2..=3).contains(&shape.len()) || channels != Some(INPUT_CHANNELS) {
        return Err(Error::InvalidArgument(format!(
            "network input must be [6, N] or [B, 6, N], got {shape:?}"
        )));
    }
    let cfg = params.config();
    let mut h = x;
    let mut batch_stats = Vec::new();
    for layer in 0..cfg.layers() {
        let (out, stats) = dsc_layer(g, bound, params, layer, h, mode, seed)?;
        batch_stats.extend(stats);
        h = out;
    }
    let features = h;
    if cfg.lka_enabled {
        h = lka_block(g, bound, params, h)?;
    }
    let delta = g.conv1d(
        h,
        bound.get("out.weight"),
        Some(bound.get("out.bias")),
        Conv1dSpec::pointwise(),
    )?;
    Ok(ForwardOutput {
        delta,
        features,
        batch_stats,
    })
}

/// `ω̃ = C_ω · ω̂ + δ` on `[3, N]` / `[B, 3, N]` tensors.
pub fn calibrate(g: &mut Graph, raw_gyro: Var, delta: Var, c_omega: Var) -> Result<Var> {
    let c = g.reshape(c_omega, &[3, 3, 1])?;
    let scaled = g.conv1d(raw_gyro, c, None, Conv1dSpec::pointwise())?;
    Ok(g.add(scaled, delta)?)
}

/// Plain-value form of [`calibrate`].
pub fn calibrate_values(raw: &[Vector3<f64>], delta: &[Vector3<f64>], c_omega: &Matrix3<f64>) -> Vec<Vector3<f64>> {
    raw.iter().zip(delta).map(|(w, d)| c_omega * w + d).collect()
}

/// Eval-mode correction for one window of channel-major normalised data
/// (`6 × n` values). Returns `3 × n` values, channel-major.
pub fn predict_delta(params: &ModelParams, data: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let bound = Bound::new(&mut g, params, false);
    let x = g.input(Tensor::new(vec![INPUT_CHANNELS, n], data.to_vec())?);
    let out = forward(&mut g, &bound, params, x, Mode::Eval, 0)?;
    Ok(g.value(out.delta).data().to_vec())
}
