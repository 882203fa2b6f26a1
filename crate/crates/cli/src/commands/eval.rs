use std::path::Path;

use lgc_core::dataset::NormStats;
use lgc_core::model::ModelParams;
use lgc_core::so3::Alignment;

use super::{
    ensure_dir, load_sequences, score, write_aoe_csv, write_orientation_csv, AOE_TABLE, NORM_STATS, RESOLVED_CONFIG,
};
use crate::config::{Normalization, RunConfig};
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::Common;

pub fn run(
    common: &Common,
    checkpoint: &Path,
    norm_stats: Option<&Path>,
    with_raw: bool,
    yaw_only: bool,
) -> Result<()> {
    let ckpt_dir = checkpoint.parent().unwrap_or(Path::new("."));
    let config_path = common.config.clone().unwrap_or_else(|| ckpt_dir.join(RESOLVED_CONFIG));
    let cfg = RunConfig::load(&config_path)?.with_seed(common.seed);
    cfg.validate(&config_path)?;
    let stats = match cfg.data.normalization {
        Normalization::Global => {
            let path = norm_stats.map_or_else(|| ckpt_dir.join(NORM_STATS), Path::to_path_buf);
            Some(NormStats::load(&path)?)
        }
        Normalization::PerSequence => None,
    };
    let mut inputs = vec![checkpoint.to_path_buf(), config_path];
    inputs.extend(norm_stats.map(Path::to_path_buf));
    inputs.extend(common.dataset.iter().cloned());
    let manifest = RunManifest::start("eval", cfg.train.seed, &cfg, inputs, &common.out);

    let params = ModelParams::load(checkpoint, &cfg.model)?;
    let seqs = load_sequences(&common.dataset, cfg.data.format)?;
    let alignment = if yaw_only { Alignment::YawOnly } else { Alignment::Full };
    let results = score(&params, &seqs, stats.as_ref(), alignment)?;

    ensure_dir(&common.out)?;
    write_aoe_csv(&common.out.join(AOE_TABLE), &results, with_raw)?;
    for (r, s) in results.iter().zip(sorted(&seqs)) {
        let path = common.out.join(format!("orientation_{}.csv", r.name));
        write_orientation_csv(&path, s.gt(), with_raw.then_some(&r.raw), &r.calibrated)?;
        if with_raw {
            log::info!("{}: AOE {:.4} deg (raw {:.4} deg)", r.name, r.aoe_calibrated, r.aoe_raw);
        } else {
            log::info!("{}: AOE {:.4} deg", r.name, r.aoe_calibrated);
        }
    }
    manifest.finish()
}

fn sorted(seqs: &[lgc_core::dataset::Sequence]) -> Vec<&lgc_core::dataset::Sequence> {
    let mut v: Vec<_> = seqs.iter().collect();
    v.sort_by(|a, b| a.name.cmp(&b.name));
    v
}
