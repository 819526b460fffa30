use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use qtkit_core::ingest::MoleculeRecord;
use qtkit_core::qtnet::{atomic_examples, train, Checkpoint, Normalization, TargetStats, Variant};
use qtkit_core::splits::PlanCell;

use super::Ctx;
use crate::error::{AtPath, CliError, Result};

pub fn checkpoint_path(ctx: &Ctx, variant: Variant, repeat: usize, fold: usize) -> PathBuf {
    ctx.checkpoints_dir().join(variant.name()).join(format!("r{}_f{}.json", repeat + 1, fold + 1))
}

/// Per-cell training seed, distinct for every (repeat, fold).
pub fn cell_seed(ctx: &Ctx, cell: &PlanCell, folds: usize) -> u64 {
    ctx.cfg.seed + 1 + (cell.repeat * folds + cell.fold) as u64
}

/// Molecules of `ids` that carry per-atom targets.
pub fn with_targets<'a>(by_id: &HashMap<&str, &'a MoleculeRecord>, ids: &[String]) -> Result<Vec<&'a MoleculeRecord>> {
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let m = by_id
            .get(id.as_str())
            .ok_or_else(|| qtkit_core::Error::Validation(format!("plan molecule {id} not in dataset")))?;
        if m.targets.is_some() {
            out.push(*m);
        }
    }
    Ok(out)
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let plan = ctx.load_plan()?;
    let by_id: HashMap<&str, &MoleculeRecord> = ds.molecules.iter().map(|m| (m.id.as_str(), m)).collect();
    let ov = ctx.cfg.train.overrides();

    for &variant in &ctx.cfg.train.variants {
        let cfg = ov.model(variant);
        let mut csv = String::from("repeat,fold,epoch,train_loss,val_loss,lr\n");
        for cell in plan.cells() {
            let path = checkpoint_path(ctx, variant, cell.repeat, cell.fold);
            let ck = if ctx.up_to_date(std::slice::from_ref(&path))? {
                log::info!("train: {variant} r{} f{} up to date", cell.repeat + 1, cell.fold + 1);
                Checkpoint::read(&path).at(&path)?
            } else {
                let train_mols = with_targets(&by_id, &cell.train_ids)?;
                let val_mols = with_targets(&by_id, &cell.val_ids)?;
                if train_mols.is_empty() {
                    return Err(CliError::Core(qtkit_core::Error::Validation(format!(
                        "repeat {} fold {}: no training molecules carry per-atom targets",
                        cell.repeat + 1,
                        cell.fold + 1
                    ))));
                }
                let stats = TargetStats::fit(train_mols.iter().flat_map(|m| m.targets.iter().flatten()))?;
                let train_set = atomic_examples(&train_mols, &cfg, &stats)?;
                let val_set = atomic_examples(&val_mols, &cfg, &stats)?;
                let hyper = ov.hyper(variant, cell_seed(ctx, &cell, plan.folds));
                log::info!(
                    "train: {variant} r{} f{}: {} train / {} val molecules, {} epochs",
                    cell.repeat + 1,
                    cell.fold + 1,
                    train_set.len(),
                    val_set.len(),
                    hyper.epochs
                );
                let out = train(&cfg, &hyper, &train_set, &val_set)?;
                let mut ck = Checkpoint::new(ctx.prov.clone(), &cfg, &out.params, Normalization::Atomic { stats });
                ck.hyperparams = Some(hyper);
                ck.element_weights = out.element_weights;
                ck.best_epoch = out.best_epoch;
                ck.best_loss = out.best_loss;
                ck.history = out.history;
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).at(dir)?;
                }
                ck.write(&path).at(&path)?;
                ck
            };
            for h in &ck.history {
                let val = h.val_loss.map_or_else(|| "NA".to_string(), |v| format!("{v:?}"));
                let _ = writeln!(
                    csv,
                    "{},{},{},{:?},{val},{:?}",
                    cell.repeat + 1,
                    cell.fold + 1,
                    h.epoch,
                    h.train_loss,
                    h.lr
                );
            }
        }
        ctx.write_stamped(&ctx.report_path(&format!("training_{}.csv", variant.name())), &csv)?;
    }
    Ok(())
}

/// Loads every checkpoint of `variant` in plan order, checking provenance.
pub fn load_checkpoints(ctx: &Ctx, variant: Variant, repeats: usize, folds: usize) -> Result<Vec<(usize, usize, Checkpoint)>> {
    let mut out = Vec::with_capacity(repeats * folds);
    for r in 0..repeats {
        for f in 0..folds {
            let path = checkpoint_path(ctx, variant, r, f);
            ctx.check_input(&path)?;
            out.push((r, f, Checkpoint::read(&path).at(&path)?));
        }
    }
    Ok(out)
}

