use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qtkit_core::ingest::{
    assemble_dataset, parse_sumviz, parse_xyz_extended, read_exclusions, write_dataset, AssemblyReport, AtomTargets,
    IngestOptions,
};
use qtkit_core::provenance::Provenance;

use super::{write_file, Ctx};
use crate::error::{AtPath, CliError, Result};

#[derive(Serialize)]
struct IngestReport<'a> {
    provenance: &'a Provenance,
    xyz_files: usize,
    /// Geometries rejected by the parser's validation, e.g. fluorine.
    rejected_files: usize,
    sumviz_files: usize,
    assembly: AssemblyReport,
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let p = entry.at(dir)?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let out = ctx.dataset_path();
    let report_path = ctx.report_path("ingest_report.json");
    if ctx.up_to_date(&[out.clone(), report_path.clone()])? {
        log::info!("ingest: outputs up to date, skipping");
        return Ok(());
    }
    let cfg = &ctx.cfg.ingest;
    let xyz_dir = cfg.xyz_dir.as_ref().ok_or_else(|| CliError::usage("ingest.xyz_dir is not set"))?;

    let xyz = files_with_ext(xyz_dir, "xyz")?;
    let mut molecules = Vec::with_capacity(xyz.len());
    let mut rejected = 0;
    for p in &xyz {
        let text = fs::read_to_string(p).at(p)?;
        match parse_xyz_extended(&text, Some(&stem(p))) {
            Ok(m) => molecules.push(m),
            Err(qtkit_core::Error::Validation(msg)) => {
                log::warn!("{}: {msg}", p.display());
                rejected += 1;
            }
            Err(e) => return Err(CliError::At { path: p.clone(), source: e }),
        }
    }
    log::info!("ingest: {} geometries parsed, {rejected} rejected", molecules.len());

    let mut targets: Vec<(String, Vec<AtomTargets>)> = Vec::new();
    let mut sumviz_files = 0;
    if let Some(dir) = &cfg.sumviz_dir {
        let by_id: std::collections::HashMap<&str, &qtkit_core::ingest::MoleculeRecord> =
            molecules.iter().map(|m| (m.id.as_str(), m)).collect();
        for p in files_with_ext(dir, "sumviz")? {
            sumviz_files += 1;
            let id = stem(&p);
            let text = fs::read_to_string(&p).at(&p)?;
            let data = parse_sumviz(&text).at(&p)?;
            if let Some(m) = by_id.get(id.as_str()) {
                if m.elements != data.elements {
                    return Err(CliError::At {
                        path: p,
                        source: qtkit_core::Error::Validation(format!("atom order differs from geometry of {id}")),
                    });
                }
            }
            targets.push((id, data.targets));
        }
    }

    let exclusions = match &cfg.exclusions {
        Some(p) => read_exclusions(&fs::read_to_string(p).at(p)?),
        None => Default::default(),
    };
    let opts = IngestOptions {
        strict_targets: cfg.strict_targets,
        require_properties: cfg.require_properties,
        require_targets: cfg.require_targets,
    };
    let (ds, assembly) = assemble_dataset(molecules, targets, &exclusions, opts, ctx.prov.clone())?;
    log::info!("ingest: {} molecules retained, {} with targets", assembly.retained, assembly.with_targets);

    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf)?;
    write_file(&out, &String::from_utf8_lossy(&buf))?;
    let report = IngestReport {
        provenance: &ctx.prov,
        xyz_files: xyz.len(),
        rejected_files: rejected,
        sumviz_files,
        assembly,
    };
    write_file(&report_path, &(serde_json::to_string_pretty(&report).map_err(qtkit_core::Error::from)? + "\n"))
}
