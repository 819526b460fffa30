//! QM9-style extended XYZ.
//!
//! Two property-line dialects are accepted:
//!
//! * QM9 native: `gdb <index> A B C mu alpha homo lumo gap r2 zpve U0 U H G Cv`,
//!   coordinates in Å, followed after the atom block by a frequency line,
//!   a `GDB-SMILES relaxed-SMILES` line and an InChI line.
//! * key=value: whitespace-separated `key=value` pairs with keys `id`,
//!   `units` (`angstrom` or `bohr`, default `angstrom`), `smiles`, `alpha`,
//!   `gap`, `u0`, `cv`, `mu`. Missing or `nan` values become absent.
//!
//! Positions are always returned in Bohr.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::geometry::{Vec3, BOHR_PER_ANGSTROM};
use crate::ingest::record::{Element, MoleculeRecord, Qm9Props};
use crate::ingest::sumviz::parse_number;

fn opt_number(tok: &str, line: usize) -> Result<Option<f64>> {
    if tok.eq_ignore_ascii_case("nan") || tok.is_empty() {
        return Ok(None);
    }
    parse_number(tok, line).map(Some)
}

/// Parses one molecule. `id_hint` overrides the identifier found in the
/// property line (QM9 files carry the id only in the file name).
pub fn parse_xyz_extended(text: &str, id_hint: Option<&str>) -> Result<MoleculeRecord> {
    let lines: Vec<&str> = text.lines().collect();
    let count_line = lines.first().ok_or_else(|| Error::parse(1, "empty xyz input"))?;
    let n: usize = count_line
        .trim()
        .parse()
        .map_err(|_| Error::parse(1, format!("invalid atom count '{}'", count_line.trim())))?;
    if n == 0 {
        return Err(Error::parse(1, "atom count must be at least 1"));
    }
    let prop_line = lines.get(1).ok_or_else(|| Error::parse(2, "missing property line"))?;
    let toks: Vec<&str> = prop_line.split_whitespace().collect();

    let mut id = None;
    let mut smiles = String::new();
    let mut qm9 = Qm9Props::default();
    let mut scale = BOHR_PER_ANGSTROM;
    let native = toks.first() == Some(&"gdb");
    if native {
        if toks.len() < 17 {
            return Err(Error::parse(2, format!("QM9 property line has {} fields, expected 17", toks.len())));
        }
        id = Some(format!("gdb_{}", toks[1]));
        qm9.mu = opt_number(toks[5], 2)?;
        qm9.alpha = opt_number(toks[6], 2)?;
        qm9.gap = opt_number(toks[9], 2)?;
        qm9.u0 = opt_number(toks[12], 2)?;
        qm9.cv = opt_number(toks[16], 2)?;
    } else {
        for t in &toks {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| Error::parse(2, format!("expected key=value, found '{t}'")))?;
            match k {
                "id" => id = Some(v.to_string()),
                "smiles" => smiles = v.to_string(),
                "units" => {
                    scale = match v.to_ascii_lowercase().as_str() {
                        "angstrom" | "a" => BOHR_PER_ANGSTROM,
                        "bohr" | "au" => 1.0,
                        other => return Err(Error::parse(2, format!("unknown units '{other}'"))),
                    }
                }
                "alpha" => qm9.alpha = opt_number(v, 2)?,
                "gap" => qm9.gap = opt_number(v, 2)?,
                "u0" => qm9.u0 = opt_number(v, 2)?,
                "cv" => qm9.cv = opt_number(v, 2)?,
                "mu" => qm9.mu = opt_number(v, 2)?,
                _ => {}
            }
        }
    }

    if lines.len() < 2 + n {
        return Err(Error::parse(lines.len() + 1, format!("expected {n} atom lines, found {}", lines.len() - 2)));
    }
    let mut elements = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for (k, line) in lines[2..2 + n].iter().enumerate() {
        let ln = k + 3;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 4 {
            return Err(Error::parse(ln, format!("atom line needs symbol and three coordinates, found {} fields", f.len())));
        }
        elements.push(f[0].parse::<Element>().map_err(|e| Error::parse(ln, e.to_string()))?);
        positions.push(Vec3::new(parse_number(f[1], ln)?, parse_number(f[2], ln)?, parse_number(f[3], ln)?) * scale);
    }
    if let Some(extra) = lines.get(2 + n) {
        let f: Vec<&str> = extra.split_whitespace().collect();
        if !native && !f.is_empty() && f[0].parse::<Element>().is_ok() && f.len() >= 4 {
            return Err(Error::parse(3 + n, format!("more atom lines than the declared count {n}")));
        }
    }
    if native {
        if let Some(sl) = lines.get(3 + n) {
            let f: Vec<&str> = sl.split_whitespace().collect();
            smiles = f.get(1).or(f.first()).map(|s| s.to_string()).unwrap_or_default();
        }
    }

    let id = id_hint
        .map(str::to_string)
        .or(id)
        .ok_or_else(|| Error::parse(2, "molecule id missing from property line"))?;
    let rec = MoleculeRecord { id, elements, positions, smiles, qm9, targets: None };
    rec.validate()?;
    Ok(rec)
}

/// Writes the key=value dialect with positions in Bohr. Floats use the
/// shortest round-trip representation, so parsing the output reproduces the
/// record exactly.
pub fn write_xyz_extended(rec: &MoleculeRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", rec.n_atoms());
    let _ = write!(s, "id={} units=bohr", rec.id);
    if !rec.smiles.is_empty() {
        let _ = write!(s, " smiles={}", rec.smiles);
    }
    for (k, v) in [("alpha", rec.qm9.alpha), ("gap", rec.qm9.gap), ("u0", rec.qm9.u0), ("cv", rec.qm9.cv), ("mu", rec.qm9.mu)] {
        if let Some(v) = v {
            let _ = write!(s, " {k}={v:?}");
        }
    }
    s.push('\n');
    for (e, p) in rec.elements.iter().zip(&rec.positions) {
        let _ = writeln!(s, "{} {:?} {:?} {:?}", e, p.x, p.y, p.z);
    }
    s
}
