use lgc_core::trainer::TrainOutcome;

use super::{load_sequences, prepare, resolve_config, train_into};
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::Common;

pub fn run(common: &Common) -> Result<TrainOutcome> {
    let cfg = resolve_config(common)?;
    let mut inputs: Vec<_> = common.config.iter().cloned().collect();
    inputs.extend(common.dataset.iter().cloned());
    let manifest = RunManifest::start("train", cfg.train.seed, &cfg, inputs, &common.out);
    let seqs = load_sequences(&common.dataset, cfg.data.format)?;
    let data = prepare(&seqs, &cfg)?;
    let outcome = train_into(&cfg, &data, &common.out)?;
    let last = outcome.report.epochs.last().expect("at least one epoch");
    println!(
        "final validation loss {:e} (best {:e} at epoch {}), param_count {}",
        last.val_loss,
        outcome.report.best_val_loss,
        outcome.report.best_epoch,
        outcome.best.param_count()
    );
    manifest.finish()?;
    Ok(outcome)
}
