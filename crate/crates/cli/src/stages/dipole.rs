use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use qtkit_core::downstream::{read_inferred_csv, reconstruct_dipole};
use qtkit_core::geometry::Vec3;
use qtkit_core::provenance::Provenance;
use qtkit_core::stats::r2;

use super::{write_file, Ctx};
use crate::config::QtaSource;
use crate::error::{AtPath, Result};

#[derive(Serialize)]
struct Summary<'a> {
    provenance: &'a Provenance,
    source: QtaSource,
    n: usize,
    r2: f64,
    max_abs_error_debye: f64,
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let outputs = [ctx.report_path("dipole_parity.csv"), ctx.report_path("dipole_summary.json")];
    if ctx.up_to_date(&outputs)? {
        log::info!("dipole: outputs up to date, skipping");
        return Ok(());
    }
    let ds = ctx.load_dataset()?;
    let source = ctx.cfg.dipole.source;
    let inferred: HashMap<String, Vec<Vec3>> = match source {
        QtaSource::Truth => HashMap::new(),
        QtaSource::Inferred => {
            let path = ctx.report_path("inferred.csv");
            let text = ctx.read_text(&path)?;
            let (_, rows) = read_inferred_csv(&text).at(&path)?;
            rows.into_iter().map(|r| (r.id, r.atoms.iter().map(|a| a.mu).collect())).collect()
        }
    };

    let mut csv = String::from("molecule_id,mu_reference_debye,mu_reconstructed_debye\n");
    let mut truth = Vec::new();
    let mut recon = Vec::new();
    for m in &ds.molecules {
        let Some(reference) = m.qm9.mu else { continue };
        let mus: Vec<Vec3> = match source {
            QtaSource::Truth => match &m.targets {
                Some(t) => t.iter().map(|a| a.mu).collect(),
                None => continue,
            },
            QtaSource::Inferred => match inferred.get(&m.id) {
                Some(v) => v.clone(),
                None => continue,
            },
        };
        let est = reconstruct_dipole(&mus).magnitude_debye;
        let _ = writeln!(csv, "{},{reference:?},{est:?}", m.id);
        truth.push(reference);
        recon.push(est);
    }
    let summary = Summary {
        provenance: &ctx.prov,
        source,
        n: truth.len(),
        r2: r2(&truth, &recon)?,
        max_abs_error_debye: truth.iter().zip(&recon).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
    };
    log::info!("dipole: R2 {:.4} over {} molecules", summary.r2, summary.n);
    ctx.write_stamped(&outputs[0], &csv)?;
    write_file(&outputs[1], &(serde_json::to_string_pretty(&summary).map_err(qtkit_core::Error::from)? + "\n"))
}
