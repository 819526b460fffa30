use qtkit_core::downstream::{best_of_repeat, infer_qta, write_inferred_csv, Candidate, Ensemble, EnsembleMember};
use qtkit_core::ingest::Dataset;

use super::train::load_checkpoints;
use super::{read_dataset_file, write_file, Ctx};
use crate::error::{CliError, Result};

pub fn run(ctx: &Ctx) -> Result<()> {
    let out = ctx.report_path("inferred.csv");
    if ctx.up_to_date(std::slice::from_ref(&out))? {
        log::info!("infer: outputs up to date, skipping");
        return Ok(());
    }
    let block = &ctx.cfg.infer;
    let variant = block
        .variant
        .or_else(|| ctx.cfg.train.variants.first().copied())
        .ok_or_else(|| CliError::usage("no variant to infer with"))?;
    let plan = ctx.load_plan()?;
    let cks = load_checkpoints(ctx, variant, plan.repeats, plan.folds)?;
    let candidates: Vec<Candidate> = cks
        .iter()
        .map(|(r, f, ck)| Candidate { repeat: *r, fold: *f, val_loss: ck.best_loss.unwrap_or(f64::INFINITY) })
        .collect();
    let chosen = best_of_repeat(&candidates);
    if chosen.is_empty() {
        return Err(qtkit_core::Error::Numeric("no checkpoint has a finite validation loss".into()).into());
    }
    let members = chosen
        .iter()
        .map(|&i| {
            let (r, f, ck) = &cks[i];
            log::info!("infer: member r{} f{} (val loss {:.5})", r + 1, f + 1, candidates[i].val_loss);
            EnsembleMember::from_checkpoint(ck)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ens = Ensemble::new(members, block.aggregation)?;

    let ds: Dataset = match &block.dataset {
        Some(p) => {
            let ds = read_dataset_file(p)?;
            log::info!("infer: external dataset {} (config_hash={})", p.display(), ds.header.provenance.config_hash);
            ds
        }
        None => ctx.load_dataset()?,
    };
    let mols: Vec<_> = ds.molecules.iter().collect();
    let rows = infer_qta(&ens, &mols, block.batch_size)?;
    log::info!("infer: {} molecules annotated by {} members", rows.len(), ens.len());
    write_file(&out, &write_inferred_csv(&ctx.prov, &rows))
}
