use nalgebra::Vector3;
use rayon::prelude::*;

use crate::dataset::{NormStats, Sequence};
use crate::error::Result;
use crate::model::{calibrate_values, predict_delta, ModelParams, INPUT_CHANNELS};
use crate::so3::{aoe, integrate_gyro, Alignment, Trajectory};

/// Per-sequence evaluation result.
#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub name: String,
    /// AOE of the integrated calibrated rates, degrees.
    pub aoe_calibrated: f64,
    /// AOE of the integrated raw gyro, degrees.
    pub aoe_raw: f64,
    pub calibrated: Trajectory,
    pub raw: Trajectory,
}

/// Network correction over a whole sequence.
///
/// Inference runs in chunks of `window + rf - 1` samples that overlap by
/// `rf - 1`; only each chunk's last `window` outputs are kept. Every kept
/// output sees its full receptive field, so the result equals one causal
/// pass over the entire sequence.
pub fn predict_sequence_delta(params: &ModelParams, seq: &Sequence, stats: &NormStats) -> Result<Vec<Vector3<f64>>> {
    let len = seq.len();
    let normalised: Vec<[f64; 6]> = seq.imu().iter().map(|s| stats.normalize(s.channels())).collect();
    let window = params.config().window.max(1);
    let context = params.config().receptive_field() - 1;
    let mut out = Vec::with_capacity(len);
    let mut start = 0;
    while start < len {
        let end = (start + window).min(len);
        let from = start.saturating_sub(context);
        let n = end - from;
        let mut data = vec![0.0; INPUT_CHANNELS * n];
        for (k, row) in normalised[from..end].iter().enumerate() {
            for c in 0..INPUT_CHANNELS {
                data[c * n + k] = row[c];
            }
        }
        let delta = predict_delta(params, &data, n)?;
        out.extend((start - from..n).map(|k| Vector3::new(delta[k], delta[n + k], delta[2 * n + k])));
        start = end;
    }
    Ok(out)
}

/// Integrates calibrated and raw rates from the first ground-truth attitude
/// and scores both against ground truth. Sequences run in parallel; results
/// keep the input order.
pub fn evaluate(
    params: &ModelParams,
    sequences: &[Sequence],
    stats: &NormStats,
    alignment: Alignment,
) -> Result<Vec<SequenceResult>> {
    sequences
        .par_iter()
        .map(|seq| {
            let raw_gyro = seq.gyro();
            let delta = predict_sequence_delta(params, seq, stats)?;
            let omega = calibrate_values(&raw_gyro, &delta, &params.c_omega());
            let gt = seq.gt();
            let r0 = gt.rotations()[0];
            let calibrated = integrate_gyro(&r0, &omega, seq.timestamps())?;
            let raw = integrate_gyro(&r0, &raw_gyro, seq.timestamps())?;
            Ok(SequenceResult {
                name: seq.name.clone(),
                aoe_calibrated: aoe(&calibrated, gt, alignment)?,
                aoe_raw: aoe(&raw, gt, alignment)?,
                calibrated,
                raw,
            })
        })
        .collect()
}
