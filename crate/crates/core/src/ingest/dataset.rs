//! Canonical line-delimited dataset: one header record, then one molecule per line.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::record::{AtomTargets, MoleculeRecord};
use crate::provenance::Provenance;

pub const SCHEMA: &str = "qtkit-dataset";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub version: u32,
    pub units: Units,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub dipole: String,
    pub quadrupole: String,
    pub alpha: String,
    pub energy: String,
    pub cv: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            length: "bohr".into(),
            dipole: "e*bohr".into(),
            quadrupole: "e*bohr^2".into(),
            alpha: "bohr^3".into(),
            energy: "hartree".into(),
            cv: "cal/(mol*K)".into(),
        }
    }
}

impl DatasetHeader {
    pub fn new(provenance: Provenance) -> Self {
        DatasetHeader { schema: SCHEMA.into(), version: SCHEMA_VERSION, units: Units::default(), provenance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub molecules: Vec<MoleculeRecord>,
}

impl Dataset {
    pub fn new(provenance: Provenance, molecules: Vec<MoleculeRecord>) -> Self {
        Dataset { header: DatasetHeader::new(provenance), molecules }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.molecules.iter().map(|m| m.id.as_str()).collect()
    }

    pub fn index_by_id(&self) -> HashMap<&str, usize> {
        self.molecules.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect()
    }

    pub fn n_atoms(&self) -> usize {
        self.molecules.iter().map(|m| m.n_atoms()).sum()
    }

    /// Molecules whose IDs appear in `ids`, in dataset order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Vec<&MoleculeRecord> {
        self.molecules.iter().filter(|m| ids.contains(&m.id)).collect()
    }
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &ds.header)?;
    w.write_all(b"\n")?;
    for m in &ds.molecules {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let header: DatasetHeader =
        serde_json::from_str(&header?).map_err(|e| Error::parse(hl, format!("bad header record: {e}")))?;
    if header.schema != SCHEMA {
        return Err(Error::parse(hl, format!("unexpected schema '{}'", header.schema)));
    }
    if header.version != SCHEMA_VERSION {
        return Err(Error::parse(hl, format!("unsupported schema version {}", header.version)));
    }
    let mut molecules = Vec::new();
    for (ln, line) in lines {
        let m: MoleculeRecord = serde_json::from_str(&line?).map_err(|e| Error::parse(ln, e.to_string()))?;
        m.validate().map_err(|e| Error::parse(ln, e.to_string()))?;
        molecules.push(m);
    }
    Ok(Dataset { header, molecules })
}

/// One molecule ID per line; blank lines and `#` comments ignored.
pub fn read_exclusions(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().next().unwrap_or(l).to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Reject molecules whose targets violate `0 < λ ≤ N`; when false the
    /// violation is logged and the molecule kept.
    pub strict_targets: bool,
    /// Drop molecules lacking any of the four QM9 regression targets.
    pub require_properties: bool,
    /// Drop molecules that have no per-atom targets.
    pub require_targets: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { strict_targets: true, require_properties: true, require_targets: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub input_molecules: usize,
    pub excluded: usize,
    pub missing_properties: usize,
    pub missing_targets: usize,
    pub invalid_targets: usize,
    pub retained: usize,
    pub with_targets: usize,
}

/// Joins geometries with per-atom targets by ID, applies exclusions and the
/// missing-property filter. Input order of `molecules` is preserved.
pub fn assemble_dataset(
    molecules: Vec<MoleculeRecord>,
    targets: Vec<(String, Vec<AtomTargets>)>,
    exclusions: &HashSet<String>,
    opts: IngestOptions,
    provenance: Provenance,
) -> Result<(Dataset, AssemblyReport)> {
    let mut seen = HashSet::new();
    for m in &molecules {
        if !seen.insert(m.id.as_str()) {
            return Err(Error::invalid(format!("duplicate molecule id {}", m.id)));
        }
    }
    let mut by_id: HashMap<String, Vec<AtomTargets>> = HashMap::new();
    for (id, t) in targets {
        if by_id.insert(id.clone(), t).is_some() {
            return Err(Error::invalid(format!("duplicate target entry for {id}")));
        }
    }

    let mut report = AssemblyReport { input_molecules: molecules.len(), ..Default::default() };
    let mut kept = Vec::new();
    for mut m in molecules {
        if exclusions.contains(&m.id) {
            report.excluded += 1;
            continue;
        }
        if opts.require_properties && !m.qm9.has_all_targets() {
            log::info!("dropping {}: missing molecular property values", m.id);
            report.missing_properties += 1;
            continue;
        }
        if let Some(t) = by_id.remove(&m.id) {
            if t.len() != m.n_atoms() {
                return Err(Error::invalid(format!(
                    "molecule {}: geometry has {} atoms but targets list {}",
                    m.id,
                    m.n_atoms(),
                    t.len()
                )));
            }
            if let Some((i, e)) = t.iter().enumerate().find_map(|(i, a)| a.validate().err().map(|e| (i, e))) {
                if opts.strict_targets {
                    return Err(Error::invalid(format!("molecule {} atom {i}: {e}", m.id)));
                }
                log::warn!("molecule {} atom {i}: {e}", m.id);
                report.invalid_targets += 1;
            }
            m.targets = Some(t);
        }
        if m.targets.is_none() {
            report.missing_targets += 1;
            if opts.require_targets {
                continue;
            }
        }
        m.validate()?;
        kept.push(m);
    }
    if !by_id.is_empty() {
        log::info!("{} target entries had no matching geometry", by_id.len());
    }
    report.retained = kept.len();
    report.with_targets = kept.iter().filter(|m| m.targets.is_some()).count();
    Ok((Dataset::new(provenance, kept), report))
}
