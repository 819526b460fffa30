//! Parser for the subset of AIMAll `.sumviz` output the toolkit consumes.
//!
//! Three sections are read, each introduced by a sentinel line (matched as a
//! prefix after trimming) and followed by a header line whose first token is
//! `Atom`:
//!
//! ```text
//! Nuclear Charges and Cartesian Coordinates:
//! ------------------------------------------
//!   Atom      Charge          X          Y          Z
//! ------------------------------------------
//!   O1        8.0        0.0000     0.0000     0.2217
//!   ...
//!
//! Some Atomic Properties:
//!   Atom      N         LI
//!   O1        9.2139    8.3870
//!   ...
//!
//! Atomic Multipole Moments:
//!   Atom  Mu_x  Mu_y  Mu_z  Q_xx  Q_xy  Q_xz  Q_yy  Q_yz  Q_zz
//!   O1    ...
//! ```
//!
//! Columns are located by header name, so extra columns are ignored. The
//! coordinates section needs `X Y Z`; the properties section needs `N LI`;
//! the multipole section needs `Mu_x Mu_y Mu_z` and either the six Cartesian
//! quadrupole columns `Q_xx Q_xy Q_xz Q_yy Q_yz Q_zz` (trace removed on
//! ingest) or the five-component columns `Q_xy Q_xz Q_yz Q_an Q_zz`.
//! Data rows end at a blank line, a dashed rule, a `Total` row or EOF.
//! Numbers may use `E` or Fortran `D` exponents. All values are atomic units.

use crate::error::{Error, Result};
use crate::geometry::{Traceless5, Vec3};
use crate::ingest::record::{AtomTargets, Element};

/// Section sentinels; configurable because AIMAll versions differ slightly.
#[derive(Debug, Clone)]
pub struct SumvizSentinels {
    pub geometry: String,
    pub properties: String,
    pub multipoles: String,
}

impl Default for SumvizSentinels {
    fn default() -> Self {
        SumvizSentinels {
            geometry: "Nuclear Charges and Cartesian Coordinates".into(),
            properties: "Some Atomic Properties".into(),
            multipoles: "Atomic Multipole Moments".into(),
        }
    }
}

/// Geometry and per-atom targets read from one `.sumviz` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SumvizData {
    pub labels: Vec<String>,
    pub elements: Vec<Element>,
    /// Nuclear positions in Bohr.
    pub positions: Vec<Vec3>,
    pub targets: Vec<AtomTargets>,
}

struct Table<'a> {
    header: Vec<&'a str>,
    header_line: usize,
    rows: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Table<'a> {
    fn columns(&self, names: &[&str], section: &str) -> Result<Vec<usize>> {
        let missing: Vec<&str> = names.iter().copied().filter(|n| !self.header.contains(n)).collect();
        if !missing.is_empty() {
            return Err(Error::parse(
                self.header_line,
                format!("section '{section}' is missing columns: {}", missing.join(", ")),
            ));
        }
        Ok(names.iter().map(|n| self.header.iter().position(|h| h == n).unwrap()).collect())
    }

    fn has_all(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.header.contains(n))
    }
}

fn is_rule(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && t.chars().all(|c| c == '-' || c == '=')
}

fn read_table<'a>(lines: &[&'a str], sentinel: &str) -> Result<Table<'a>> {
    let start = lines
        .iter()
        .position(|l| l.trim_start().starts_with(sentinel))
        .ok_or_else(|| Error::parse(lines.len(), format!("missing section '{sentinel}'")))?;
    let mut i = start + 1;
    while i < lines.len() && (lines[i].trim().is_empty() || is_rule(lines[i])) {
        i += 1;
    }
    let header: Vec<&str> = lines.get(i).map(|l| l.split_whitespace().collect()).unwrap_or_default();
    if header.first() != Some(&"Atom") {
        return Err(Error::parse(i + 1, format!("section '{sentinel}' has no 'Atom' header row")));
    }
    let header_line = i + 1;
    i += 1;
    while i < lines.len() && is_rule(lines[i]) {
        i += 1;
    }
    let mut rows = Vec::new();
    while i < lines.len() {
        let l = lines[i];
        if l.trim().is_empty() || is_rule(l) {
            break;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if matches!(toks[0], "Total" | "Sum") {
            break;
        }
        if toks.len() < header.len() {
            return Err(Error::parse(
                i + 1,
                format!("expected {} columns, found {}", header.len(), toks.len()),
            ));
        }
        rows.push((i + 1, toks));
        i += 1;
    }
    if rows.is_empty() {
        return Err(Error::parse(header_line, format!("section '{sentinel}' has no atom rows")));
    }
    Ok(Table { header, header_line, rows })
}

pub(crate) fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let norm = tok.replace(['D', 'd'], "E").replace("*^", "E");
    norm.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("malformed number '{tok}'")))
}

fn element_of_label(label: &str, line: usize) -> Result<Element> {
    let sym: String = label.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let mut chars = sym.chars();
    let norm: String = match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + &chars.as_str().to_ascii_lowercase(),
        None => String::new(),
    };
    norm.parse::<Element>().map_err(|e| Error::parse(line, e.to_string()))
}

const CART6: [&str; 6] = ["Q_xx", "Q_xy", "Q_xz", "Q_yy", "Q_yz", "Q_zz"];
const FIVE: [&str; 5] = ["Q_xy", "Q_xz", "Q_yz", "Q_an", "Q_zz"];

/// Parses a `.sumviz` document with the default sentinels.
pub fn parse_sumviz(text: &str) -> Result<SumvizData> {
    parse_sumviz_with(text, &SumvizSentinels::default())
}

pub fn parse_sumviz_with(text: &str, sentinels: &SumvizSentinels) -> Result<SumvizData> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(Error::parse(1, "empty .sumviz input"));
    }

    let geo = read_table(&lines, &sentinels.geometry)?;
    let gc = geo.columns(&["X", "Y", "Z"], &sentinels.geometry)?;
    let mut labels = Vec::with_capacity(geo.rows.len());
    let mut elements = Vec::with_capacity(geo.rows.len());
    let mut positions = Vec::with_capacity(geo.rows.len());
    for (ln, row) in &geo.rows {
        labels.push(row[0].to_string());
        elements.push(element_of_label(row[0], *ln)?);
        positions.push(Vec3::new(
            parse_number(row[gc[0]], *ln)?,
            parse_number(row[gc[1]], *ln)?,
            parse_number(row[gc[2]], *ln)?,
        ));
    }

    let props = read_table(&lines, &sentinels.properties)?;
    let pc = props.columns(&["N", "LI"], &sentinels.properties)?;
    let mult = read_table(&lines, &sentinels.multipoles)?;
    let mc = mult.columns(&["Mu_x", "Mu_y", "Mu_z"], &sentinels.multipoles)?;
    let cartesian = mult.has_all(&CART6);
    let qc = if cartesian {
        mult.columns(&CART6, &sentinels.multipoles)?
    } else if mult.has_all(&FIVE) {
        mult.columns(&FIVE, &sentinels.multipoles)?
    } else {
        return mult.columns(&CART6, &sentinels.multipoles).map(|_| unreachable!());
    };

    for (table, name) in [(&props, &sentinels.properties), (&mult, &sentinels.multipoles)] {
        if table.rows.len() != labels.len() {
            return Err(Error::parse(
                table.header_line,
                format!("section '{name}' lists {} atoms, coordinates list {}", table.rows.len(), labels.len()),
            ));
        }
        for ((ln, row), label) in table.rows.iter().zip(&labels) {
            if row[0] != label {
                return Err(Error::parse(*ln, format!("atom '{}' out of order, expected '{label}'", row[0])));
            }
        }
    }

    let mut targets = Vec::with_capacity(labels.len());
    for ((pl, prow), (ml, mrow)) in props.rows.iter().zip(&mult.rows) {
        let n_e = parse_number(prow[pc[0]], *pl)?;
        let li = parse_number(prow[pc[1]], *pl)?;
        let mu = Vec3::new(parse_number(mrow[mc[0]], *ml)?, parse_number(mrow[mc[1]], *ml)?, parse_number(mrow[mc[2]], *ml)?);
        let q: Vec<f64> = qc.iter().map(|&c| parse_number(mrow[c], *ml)).collect::<Result<_>>()?;
        let quad = if cartesian {
            Traceless5::from_cartesian6([q[0], q[1], q[2], q[3], q[4], q[5]])
        } else {
            Traceless5::from_array([q[0], q[1], q[2], q[3], q[4]])
        };
        targets.push(AtomTargets { n_e, li, mu, quad });
    }

    Ok(SumvizData { labels, elements, positions, targets })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIXTURE: &str = "\
AIMAll summary (trimmed)

Nuclear Charges and Cartesian Coordinates:
------------------------------------------------------------
  Atom      Charge                X                  Y                  Z
------------------------------------------------------------
  O1       8.0000000000E+00   0.0000000000E+00   0.0000000000E+00   2.2170000000E-01
  H2       1.0000000000E+00   0.0000000000E+00   1.4305000000E+00  -8.8680000000E-01
  H3       1.0000000000E+00   0.0000000000E+00  -1.4305000000E+00  -8.8680000000E-01
------------------------------------------------------------
  Total    1.0000000000E+01

Some Atomic Properties:
------------------------------------------------------------
  Atom       N          LI         K
------------------------------------------------------------
  O1       9.2500     8.5000     75.1
  H2       0.3750     0.1250     0.40
  H3       0.3750     0.1250     0.40

Atomic Multipole Moments:
  Atom   Mu_x    Mu_y     Mu_z    Q_xx   Q_xy   Q_xz   Q_yy   Q_yz   Q_zz
  O1     0.0     0.0     -0.25    1.0    0.0    0.0   -0.5    0.0   -0.5
  H2     0.0     0.125    0.0625  0.0    0.0    0.0    0.0    0.5    0.0
  H3     0.0    -0.125    0.0625  0.0    0.0    0.0    0.0   -0.5    0.0
";

    #[test]
    fn golden_fixture() {
        let d = parse_sumviz(FIXTURE).unwrap();
        assert_eq!(d.labels, ["O1", "H2", "H3"]);
        assert_eq!(d.elements, [Element::O, Element::H, Element::H]);
        assert_eq!(d.positions[1], Vec3::new(0.0, 1.4305, -0.8868));
        assert_eq!(d.targets.len(), 3);
        let o = &d.targets[0];
        assert_eq!((o.n_e, o.li), (9.25, 8.5));
        assert_eq!(o.mu, Vec3::new(0.0, 0.0, -0.25));
        // diag(1, -0.5, -0.5): traceless, an = 0.75, zz = -0.5
        assert_eq!(o.quad.to_array(), [0.0, 0.0, 0.0, 0.75, -0.5]);
        assert_eq!(d.targets[1].quad.to_array(), [0.0, 0.0, 0.5, 0.0, 0.0]);
        assert_eq!(d.targets[2].mu, Vec3::new(0.0, -0.125, 0.0625));
        assert_eq!((d.targets[2].n_e, d.targets[2].li), (0.375, 0.125));
    }

    #[test]
    fn five_component_layout() {
        let text = FIXTURE
            .replace("Q_xx   Q_xy   Q_xz   Q_yy   Q_yz   Q_zz", "Q_xy   Q_xz   Q_yz   Q_an   Q_zz   pad")
            .replace("-0.25    1.0    0.0    0.0   -0.5    0.0   -0.5", "-0.25    0.0    0.0    0.0    0.75  -0.5  0");
        let d = parse_sumviz(&text).unwrap();
        assert_eq!(d.targets[0].quad.to_array(), [0.0, 0.0, 0.0, 0.75, -0.5]);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(parse_sumviz(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_sumviz("\n\n  \n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_columns_are_named() {
        let text = FIXTURE.replace("Atom       N          LI         K", "Atom       N          XX         K");
        let err = parse_sumviz(&text).unwrap_err().to_string();
        assert!(err.contains("missing columns: LI"), "{err}");
        assert!(err.contains("line 15"), "{err}");
    }

    #[test]
    fn missing_section_reported() {
        let cut = FIXTURE.split("Atomic Multipole Moments").next().unwrap();
        let err = parse_sumviz(cut).unwrap_err().to_string();
        assert!(err.contains("Atomic Multipole Moments"), "{err}");
    }

    #[test]
    fn malformed_number_has_line() {
        let text = FIXTURE.replace("9.2500", "9.2x00");
        match parse_sumviz(&text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 17);
                assert!(msg.contains("9.2x00"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn atom_count_mismatch() {
        let text = FIXTURE.replace("  H3       0.3750     0.1250     0.40\n", "");
        let err = parse_sumviz(&text).unwrap_err().to_string();
        assert!(err.contains("lists 2 atoms"), "{err}");
    }

    #[test]
    fn fortran_exponents() {
        assert_eq!(parse_number("1.5D-01", 1).unwrap(), 0.15);
        assert_eq!(parse_number("2.0*^-3", 1).unwrap(), 0.002);
    }
}
