use std::path::{Path, PathBuf};

use lgc_core::so3::Alignment;
use lgc_core::trainer::SequenceResult;

use super::{ensure_dir, load_sequences, prepare, resolve_config, score, train_into, write_text};
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::Common;

pub const TABLE: &str = "ablation.csv";
pub const SUMMARY: &str = "ablation_summary.csv";

struct Variant {
    name: &'static str,
    lka: bool,
    param_count: usize,
    best_epoch: usize,
    best_val_loss: f64,
    final_val_loss: f64,
    results: Vec<SequenceResult>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn run(common: &Common, test: &[PathBuf]) -> Result<()> {
    let cfg = resolve_config(common)?;
    let mut inputs: Vec<_> = common.config.iter().cloned().collect();
    inputs.extend(common.dataset.iter().cloned());
    inputs.extend(test.iter().cloned());
    let manifest = RunManifest::start("ablate", cfg.train.seed, &cfg, inputs, &common.out);
    ensure_dir(&common.out)?;

    let seqs = load_sequences(&common.dataset, cfg.data.format)?;
    let data = prepare(&seqs, &cfg)?;
    let held_out = if test.is_empty() {
        data.val_sequences.clone()
    } else {
        load_sequences(test, cfg.data.format)?
    };

    let mut variants = Vec::new();
    for (name, lka) in [("lka", true), ("no_lka", false)] {
        let mut c = cfg.clone();
        c.model.lka_enabled = lka;
        log::info!("ablation variant {name}");
        let outcome = train_into(&c, &data, &common.out.join(name))?;
        let results = score(&outcome.best, &held_out, data.stats.as_ref(), Alignment::Full)?;
        variants.push(Variant {
            name,
            lka,
            param_count: outcome.best.param_count(),
            best_epoch: outcome.report.best_epoch,
            best_val_loss: outcome.report.best_val_loss,
            final_val_loss: outcome.report.epochs.last().map_or(f64::NAN, |e| e.val_loss),
            results,
        });
    }
    write_tables(&common.out, &variants)?;
    manifest.finish()
}

fn write_tables(out: &Path, v: &[Variant]) -> Result<()> {
    let (with, without) = (&v[0], &v[1]);
    let mut table = String::from("sequence,aoe_deg_lka,aoe_deg_no_lka,aoe_deg_raw\n");
    for (a, b) in with.results.iter().zip(&without.results) {
        table.push_str(&format!(
            "{},{},{},{}\n",
            a.name, a.aoe_calibrated, b.aoe_calibrated, a.aoe_raw
        ));
    }
    table.push_str(&format!(
        "mean,{},{},{}\n",
        mean(with.results.iter().map(|r| r.aoe_calibrated)),
        mean(without.results.iter().map(|r| r.aoe_calibrated)),
        mean(with.results.iter().map(|r| r.aoe_raw)),
    ));
    write_text(&out.join(TABLE), &table)?;

    let mut summary =
        String::from("variant,lka_enabled,param_count,best_epoch,best_val_loss,final_val_loss,mean_aoe_deg\n");
    for x in v {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            x.name,
            x.lka,
            x.param_count,
            x.best_epoch,
            x.best_val_loss,
            x.final_val_loss,
            mean(x.results.iter().map(|r| r.aoe_calibrated))
        ));
        log::info!(
            "{}: {} parameters, best validation loss {:e}",
            x.name,
            x.param_count,
            x.best_val_loss
        );
    }
    write_text(&out.join(SUMMARY), &summary)
}
