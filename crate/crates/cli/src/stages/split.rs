use std::collections::{BTreeMap, BTreeSet};

use qtkit_core::environments::{absorbed_labels, build_holdout};
use qtkit_core::splits::{build_plan, scaffold_groups};

use super::{cluster::read_held, write_file, Ctx};
use crate::error::Result;

pub fn run(ctx: &Ctx) -> Result<()> {
    let outputs = [ctx.plan_path(), ctx.report_path("split_summary.csv")];
    if ctx.up_to_date(&outputs)? {
        log::info!("split: outputs up to date, skipping");
        return Ok(());
    }
    let ds = ctx.load_dataset()?;
    let labels = ctx.load_labels()?;
    let held = read_held(ctx)?;

    let ids: Vec<String> = ds.molecules.iter().map(|m| m.id.clone()).collect();
    let (pool, holdout) = build_holdout(&ids, &labels, &held)?;
    let absorbed = absorbed_labels(&labels, &holdout);
    let extra: Vec<String> = absorbed.iter().filter(|l| !held.contains(l)).map(ToString::to_string).collect();
    if !extra.is_empty() {
        log::info!("split: labels absorbed by the holdout: {}", extra.join(","));
    }

    let pool_set: BTreeSet<String> = pool.iter().cloned().collect();
    let pool_mols = ds.subset(&pool_set);
    let groups = scaffold_groups(&pool_mols, ctx.cfg.split.acyclic)?;
    let plan = build_plan(&groups, &holdout, &ctx.cfg.split_seeds(), ctx.cfg.split.folds, ctx.prov.clone())?;
    log::info!(
        "split: {} pool molecules in {} scaffold groups, {} held out",
        pool.len(),
        groups.iter().map(|(_, k)| k).collect::<BTreeSet<_>>().len(),
        holdout.len()
    );
    write_file(&outputs[0], &(plan.to_json()? + "\n"))?;

    let mut csv = String::from("repeat,fold,seed,train,val,val_scaffolds\n");
    for cell in plan.cells() {
        let keys: BTreeMap<&str, ()> =
            cell.val_ids.iter().map(|id| (plan.scaffolds[id].as_str(), ())).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.repeat + 1,
            cell.fold + 1,
            plan.seeds[cell.repeat],
            cell.train_ids.len(),
            cell.val_ids.len(),
            keys.len()
        ));
    }
    csv.push_str(&format!("holdout,,,,{},\n", plan.holdout_ids.len()));
    ctx.write_stamped(&outputs[1], &csv)
}
