use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use qtkit_core::downstream::{paired_comparison, Mode};
use qtkit_core::stats::{compare_models, ScoreMatrix};

use super::{file_safe, Ctx};
use crate::error::{AtPath, Result};

/// Label of the slice that averages every stratum.
pub const POOLED: &str = "pooled";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// `explicit` score files are taken as given; without them the run's own
/// `scores_*.csv` reports are used and must match the current config.
pub fn run(ctx: &Ctx, explicit: &[PathBuf]) -> Result<()> {
    let summary = ctx.report_path("stats.txt");
    let fresh = ctx.up_to_date(std::slice::from_ref(&summary))?;
    let inputs: Vec<PathBuf> = if explicit.is_empty() {
        if fresh {
            log::info!("stats: outputs up to date, skipping");
            return Ok(());
        }
        let defaults: Vec<PathBuf> = ["scores_qtnet.csv", "scores_molecular.csv"]
            .iter()
            .map(|n| ctx.report_path(n))
            .filter(|p| p.exists())
            .collect();
        for p in &defaults {
            ctx.check_input(p)?;
        }
        if defaults.is_empty() {
            return Err(qtkit_core::Error::MissingArtifact(ctx.report_path("scores_qtnet.csv")).into());
        }
        defaults
    } else {
        explicit.to_vec()
    };

    let mut text = String::new();
    for path in &inputs {
        let raw = fs::read_to_string(path).at(path)?;
        let (prov, scores) = ScoreMatrix::from_csv(&raw).at(path)?;
        match &prov {
            Some(p) => log::info!("stats: {} (config_hash={})", path.display(), p.config_hash),
            None => log::info!("stats: {} (no provenance)", path.display()),
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let name = file_safe(&name);
        let repeats = scores.entries.iter().map(|e| e.repeat).max().unwrap_or(0);
        let folds = scores.entries.iter().map(|e| e.fold).max().unwrap_or(0);
        let metrics: BTreeSet<&str> = scores.entries.iter().map(|e| e.metric.as_str()).collect();
        for metric in metrics {
            let models: Vec<String> = scores
                .models()
                .into_iter()
                .filter(|m| scores.entries.iter().any(|e| &e.model == m && e.metric == metric))
                .collect();
            let strata: Vec<String> = scores
                .strata()
                .into_iter()
                .filter(|s| scores.entries.iter().any(|e| &e.stratum == s && e.metric == metric))
                .collect();
            if models.len() < 2 {
                log::info!("stats: {name}/{metric}: fewer than two models, no comparison");
                continue;
            }
            let mut slices: Vec<(String, Vec<String>)> = strata.iter().map(|s| (s.clone(), vec![s.clone()])).collect();
            if strata.len() > 1 {
                slices.push((POOLED.to_string(), strata.clone()));
            }
            for (label, sel) in slices {
                let title = format!("{name} {metric} {label} ({repeats}x{folds})");
                let rep = compare_models(&scores, &models, metric, &sel, repeats, folds, &title).at(path)?;
                let stem = format!("stats/{name}_{}_{}", file_safe(metric), file_safe(&label));
                ctx.write_stamped(&ctx.report_path(&format!("{stem}_tukey.csv")), &rep.tukey_csv())?;
                ctx.write_stamped(&ctx.report_path(&format!("{stem}_diagnostics.csv")), &rep.diagnostics_csv())?;
                text.push_str(&rep.render_text());
                text.push('\n');
            }
            let has_modes = [Mode::Informed, Mode::Blind].iter().all(|m| models.iter().any(|x| x == m.name()));
            if has_modes && metric == "r2" {
                let mut csv = String::from("stratum,n,mean_delta,sem,icc,shapiro_p,t_p,wilcoxon_p,degenerate\n");
                for s in &strata {
                    let b = paired_comparison(&scores, s, repeats, folds).at(path)?;
                    let _ = writeln!(
                        csv,
                        "{s},{},{:.6},{:.6},{},{},{},{},{}",
                        b.n,
                        b.mean_delta,
                        b.sem,
                        opt(b.icc),
                        opt(b.shapiro_p),
                        opt(b.t_p),
                        opt(b.wilcoxon_p),
                        b.degenerate
                    );
                }
                ctx.write_stamped(&ctx.report_path(&format!("stats/{name}_paired.csv")), &csv)?;
            }
        }
    }
    if text.is_empty() {
        text.push_str("no comparisons: every metric has fewer than two models\n");
    }
    ctx.write_stamped(&summary, &text)
}
