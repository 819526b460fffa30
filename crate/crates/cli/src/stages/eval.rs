use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use qtkit_core::downstream::{
    read_inferred_csv, run_molecular_experiment, write_parity_csv, ExperimentGrid, Mode, MolecularExperiment,
};
use qtkit_core::ingest::{AtomTargets, MoleculeRecord};
use qtkit_core::qtnet::{predict_examples, Example, Normalization, Variant};
use qtkit_core::stats::{ccc, ScoreMatrix};

use super::train::{load_checkpoints, with_targets};
use super::{write_file, Ctx};
use crate::config::QtaSource;
use crate::error::{AtPath, Result};

/// Holdout properties scored per checkpoint; vector and tensor components
/// are pooled.
pub const QTA_PROPERTIES: [&str; 4] = ["N", "lambda", "mu", "Q"];

fn components(a: &AtomTargets, prop: &str) -> Vec<f64> {
    let v = a.to_array();
    match prop {
        "N" => vec![v[0]],
        "lambda" => vec![v[1]],
        "mu" => v[2..5].to_vec(),
        _ => v[5..10].to_vec(),
    }
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let qt_path = ctx.report_path("scores_qtnet.csv");
    let mut outputs = vec![qt_path.clone()];
    let exp_outputs = [
        ctx.report_path("scores_molecular.csv"),
        ctx.report_path("parity_molecular.csv"),
        ctx.report_path("learning_curve.csv"),
    ];
    if ctx.cfg.experiment.enabled {
        outputs.extend(exp_outputs.iter().cloned());
    }
    if ctx.up_to_date(&outputs)? {
        log::info!("eval: outputs up to date, skipping");
        return Ok(());
    }
    let ds = ctx.load_dataset()?;
    let plan = ctx.load_plan()?;
    let by_id: HashMap<&str, &MoleculeRecord> = ds.molecules.iter().map(|m| (m.id.as_str(), m)).collect();

    let holdout = with_targets(&by_id, &plan.holdout_ids)?;
    let mut scores = ScoreMatrix::default();
    if holdout.is_empty() {
        log::warn!("eval: no holdout molecule carries per-atom targets; QT-Net scores left empty");
    }
    for &variant in &ctx.cfg.train.variants {
        if holdout.is_empty() {
            break;
        }
        for (r, f, ck) in load_checkpoints(ctx, variant, plan.repeats, plan.folds)? {
            let Normalization::Atomic { stats } = &ck.normalization else {
                unreachable!("train writes atomic checkpoints")
            };
            let params = ck.param_set()?;
            let examples: Vec<Example> =
                holdout.iter().map(|m| Example::atomic(m, &ck.config, stats)).collect::<Result<_, _>>()?;
            let preds = predict_examples(&ck.config, &params, &examples, ctx.cfg.eval.batch_size)?;
            for prop in QTA_PROPERTIES {
                let mut truth = Vec::new();
                let mut pred = Vec::new();
                for (m, p) in holdout.iter().zip(&preds) {
                    for (t, y) in m.targets.as_deref().unwrap_or_default().iter().zip(stats.invert_matrix(p)) {
                        truth.extend(components(t, prop));
                        pred.extend(components(&y, prop));
                    }
                }
                let v = ccc(&truth, &pred)?;
                scores.push(variant.name(), r + 1, f + 1, prop, "ccc", v);
            }
            log::info!("eval: {variant} r{} f{} scored on {} holdout molecules", r + 1, f + 1, holdout.len());
        }
    }
    write_file(&qt_path, &scores.to_csv(&ctx.prov))?;

    if ctx.cfg.experiment.enabled {
        molecular(ctx, &ds.molecules, &plan, &exp_outputs)?;
    }
    Ok(())
}

fn molecular(
    ctx: &Ctx,
    molecules: &[MoleculeRecord],
    plan: &qtkit_core::splits::FoldPlan,
    outputs: &[std::path::PathBuf; 3],
) -> Result<()> {
    let block = &ctx.cfg.experiment;
    let ov = block.overrides();
    let exp = MolecularExperiment {
        config: ov.model(Variant::Molecular),
        hyper: ov.hyper(Variant::Molecular, ctx.cfg.seed),
        grid: ExperimentGrid {
            fractions: block.fractions.clone(),
            properties: block.properties.clone(),
            val_share: block.val_share,
        },
    };
    let qta: Option<HashMap<String, Vec<AtomTargets>>> = match block.informed_inputs {
        QtaSource::Truth => None,
        QtaSource::Inferred => {
            let path = ctx.report_path("inferred.csv");
            let text = ctx.read_text(&path)?;
            let (_, rows) = read_inferred_csv(&text).at(&path)?;
            Some(rows.into_iter().map(|r| (r.id, r.atoms)).collect())
        }
    };

    let mut scores = ScoreMatrix::default();
    let mut parity = Vec::new();
    for mode in [Mode::Informed, Mode::Blind] {
        log::info!("eval: molecular experiment, {} mode", mode.name());
        let out = run_molecular_experiment(&exp, mode, molecules, plan, qta.as_ref())?;
        scores.entries.extend(out.scores.entries);
        parity.extend(out.parity);
    }
    write_file(&outputs[0], &scores.to_csv(&ctx.prov))?;
    write_file(&outputs[1], &write_parity_csv(&ctx.prov, &parity))?;

    // Mean and sample SD of the fold R² per (mode, stratum).
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for e in &scores.entries {
        groups.entry((e.model.clone(), e.stratum.clone())).or_default().push(e.value);
    }
    let mut csv = String::from("mode,fraction,property,mean_r2,sd_r2,n\n");
    for ((mode, stratum), v) in &groups {
        let (fraction, property) = stratum.split_once('/').unwrap_or((stratum.as_str(), ""));
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        let _ = writeln!(csv, "{mode},{fraction},{property},{mean:.6},{sd:.6},{}", v.len());
    }
    ctx.write_stamped(&outputs[2], &csv)
}
