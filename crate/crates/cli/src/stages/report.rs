use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qtkit_core::provenance::hash_bytes;
use qtkit_core::stats::ScoreMatrix;

use super::{artifact_provenance, Ctx};
use crate::error::{AtPath, CliError, Result};

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).at(dir)? {
        let p = entry.at(dir)?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn rel(ctx: &Ctx, p: &Path) -> String {
    p.strip_prefix(&ctx.out_dir).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn score_means(md: &mut String, title: &str, path: &Path) -> Result<()> {
    let (_, scores) = ScoreMatrix::from_csv(&fs::read_to_string(path).at(path)?).at(path)?;
    let mut groups: BTreeMap<(&str, &str, &str), (f64, usize)> = BTreeMap::new();
    for e in &scores.entries {
        let g = groups.entry((e.metric.as_str(), e.stratum.as_str(), e.model.as_str())).or_default();
        g.0 += e.value;
        g.1 += 1;
    }
    let _ = writeln!(md, "## {title}\n\n| metric | stratum | model | mean | cells |\n|---|---|---|---|---|");
    for ((metric, stratum, model), (sum, n)) in groups {
        let _ = writeln!(md, "| {metric} | {stratum} | {model} | {:.4} | {n} |", sum / n as f64);
    }
    md.push('\n');
    Ok(())
}

/// Checks that every artifact under the output directory was produced by the
/// current config, then writes `report.md`.
pub fn run(ctx: &Ctx) -> Result<()> {
    let out = ctx.report_path("report.md");
    let mut files = Vec::new();
    walk(&ctx.out_dir, &mut files)?;
    files.retain(|p| *p != out);
    files.sort_by_key(|p| rel(ctx, p));

    let mut rows = Vec::new();
    for p in &files {
        let prov = artifact_provenance(p)?;
        if prov.config_hash != ctx.prov.config_hash {
            return Err(CliError::At {
                path: p.clone(),
                source: qtkit_core::Error::ConfigMismatch {
                    expected: ctx.prov.config_hash.clone(),
                    found: prov.config_hash,
                },
            });
        }
        let bytes = fs::read(p).at(p)?;
        rows.push((rel(ctx, p), bytes.len(), hash_bytes(&bytes)));
    }

    let mut md = String::from("# qtkit run report\n\n");
    let _ = writeln!(
        md,
        "- config hash: `{}`\n- toolkit version: {}\n- seed: {}\n- artifacts: {}\n",
        ctx.prov.config_hash,
        ctx.prov.version,
        ctx.prov.seed,
        rows.len()
    );
    md.push_str("## Artifacts\n\n| path | bytes | sha256 |\n|---|---|---|\n");
    for (path, len, hash) in &rows {
        let _ = writeln!(md, "| {path} | {len} | `{}` |", &hash[..16]);
    }
    md.push('\n');

    let ingest = ctx.report_path("ingest_report.json");
    if ingest.exists() {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&ingest).at(&ingest)?).map_err(qtkit_core::Error::from).at(&ingest)?;
        md.push_str("## Ingest\n\n");
        if let Some(a) = v.get("assembly").and_then(|a| a.as_object()) {
            for (k, val) in a {
                let _ = writeln!(md, "- {k}: {val}");
            }
        }
        md.push('\n');
    }
    for (name, title) in [("scores_qtnet.csv", "QT-Net holdout CCC"), ("scores_molecular.csv", "Molecular experiment R²")] {
        let p = ctx.report_path(name);
        if p.exists() {
            score_means(&mut md, title, &p)?;
        }
    }
    let dipole = ctx.report_path("dipole_summary.json");
    if dipole.exists() {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&dipole).at(&dipole)?).map_err(qtkit_core::Error::from).at(&dipole)?;
        let _ = writeln!(
            md,
            "## Dipole reconstruction\n\n- source: {}\n- molecules: {}\n- R²: {}\n- max |error| (D): {}\n",
            v["source"], v["n"], v["r2"], v["max_abs_error_debye"]
        );
    }
    let stats = ctx.report_path("stats.txt");
    if stats.exists() {
        let text = fs::read_to_string(&stats).at(&stats)?;
        let body = text.split_once('\n').map_or("", |(_, b)| b);
        let _ = writeln!(md, "## Model comparisons\n\n```text\n{}```", body);
    }
    super::write_file(&out, &md)
}
