use std::path::Path;

use lgc_core::synth::{synthesize, write_sequence, ErrorModel, SynthScenario};

use super::{ensure_dir, resolve_config};
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::Common;

pub const ERROR_MODEL: &str = "error_model.json";

/// Noise seed of sequence `index`, decorrelated from its motion seed.
pub fn noise_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index) ^ 0x6e6f_6973_6500_0000
}

pub fn run(common: &Common, error_model: Option<&Path>) -> Result<()> {
    let mut cfg = resolve_config(common)?;
    if let Some(path) = error_model {
        cfg.synth.error_model = Some(ErrorModel::load(path)?);
    }
    let model = cfg.synth.error_model.clone().unwrap_or_default();
    model.validate()?;
    let mut inputs: Vec<_> = common.config.iter().cloned().collect();
    inputs.extend(error_model.map(Path::to_path_buf));
    let manifest = RunManifest::start("synth", cfg.synth.seed, &cfg, inputs, &common.out);
    ensure_dir(&common.out)?;
    let sc = &cfg.synth;
    for i in 0..sc.count {
        let name = if sc.count == 1 {
            sc.name.clone()
        } else {
            format!("{}_{i}", sc.name)
        };
        let scenario = SynthScenario {
            duration: sc.duration,
            rate: sc.rate,
            profile: sc.profile.clone(),
            seed: sc.seed.wrapping_add(i as u64),
        };
        let (seq, _) = synthesize(&name, &scenario, &model, noise_seed(sc.seed, i as u64))?;
        write_sequence(&common.out.join(&name), &seq)?;
        log::info!("wrote {name}: {} samples", seq.len());
    }
    model.save(&common.out.join(ERROR_MODEL))?;
    manifest.finish()
}
