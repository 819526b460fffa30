use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Traceless5, Vec3};

/// The four supported species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    H,
    C,
    N,
    O,
}

impl Element {
    pub const ALL: [Element; 4] = [Element::H, Element::C, Element::N, Element::O];

    /// Dense index in `0..4`, used for embeddings and species channels.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Element> {
        Self::ALL.get(i).copied()
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(Element::H),
            "C" => Ok(Element::C),
            "N" => Ok(Element::N),
            "O" => Ok(Element::O),
            "F" => Err(Error::invalid("fluorine-containing molecules are excluded")),
            other => Err(Error::invalid(format!("unsupported element '{other}'"))),
        }
    }
}

/// Subset of QM9 molecular properties. Units: α in Bohr³, gap and U₀ in
/// Hartree, C_v in cal/(mol·K), μ in Debye.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Qm9Props {
    pub alpha: Option<f64>,
    pub gap: Option<f64>,
    pub u0: Option<f64>,
    pub cv: Option<f64>,
    pub mu: Option<f64>,
}

impl Qm9Props {
    /// Names of the four regression targets, in grid order.
    pub const TARGETS: [&'static str; 4] = ["alpha", "gap", "u0", "cv"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "alpha" => self.alpha,
            "gap" => self.gap,
            "u0" => self.u0,
            "cv" => self.cv,
            "mu" => self.mu,
            _ => None,
        }
    }

    pub fn has_all_targets(&self) -> bool {
        Self::TARGETS.iter().all(|t| self.get(t).is_some_and(f64::is_finite))
    }
}

/// Per-atom ground truth in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomTargets {
    /// Electron population N.
    pub n_e: f64,
    /// Localization index λ = N − σ²(N).
    pub li: f64,
    /// Atomic contribution to the molecular dipole (e·Bohr).
    pub mu: Vec3,
    /// Traceless quadrupole (e·Bohr²).
    pub quad: Traceless5,
}

impl AtomTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_e > 0.0) {
            return Err(Error::invalid(format!("electron population must be positive, got {}", self.n_e)));
        }
        if !(self.li > 0.0 && self.li <= self.n_e) {
            return Err(Error::invalid(format!(
                "localization index {} outside (0, N={}]",
                self.li, self.n_e
            )));
        }
        if !self.mu.is_finite() || !self.quad.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite multipole component"));
        }
        Ok(())
    }

    /// Flattened `[N, λ, μx, μy, μz, Qxy, Qxz, Qyz, Qan, Qzz]`.
    pub fn to_array(&self) -> [f64; 10] {
        let q = self.quad.to_array();
        [self.n_e, self.li, self.mu.x, self.mu.y, self.mu.z, q[0], q[1], q[2], q[3], q[4]]
    }

    pub fn from_array(a: &[f64]) -> Self {
        AtomTargets {
            n_e: a[0],
            li: a[1],
            mu: Vec3::new(a[2], a[3], a[4]),
            quad: Traceless5::from_array([a[5], a[6], a[7], a[8], a[9]]),
        }
    }
}

/// One molecule with geometry in Bohr and optional per-atom targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRecord {
    pub id: String,
    pub elements: Vec<Element>,
    pub positions: Vec<Vec3>,
    pub smiles: String,
    pub qm9: Qm9Props,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<AtomTargets>>,
}

impl MoleculeRecord {
    pub fn n_atoms(&self) -> usize {
        self.elements.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid(format!("molecule {} has no atoms", self.id)));
        }
        if self.elements.len() != self.positions.len() {
            return Err(Error::invalid(format!(
                "molecule {}: {} elements but {} positions",
                self.id,
                self.elements.len(),
                self.positions.len()
            )));
        }
        if let Some(p) = self.positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("molecule {}: non-finite coordinate {p:?}", self.id)));
        }
        if let Some(t) = &self.targets {
            if t.len() != self.elements.len() {
                return Err(Error::invalid(format!(
                    "molecule {}: {} targets for {} atoms",
                    self.id,
                    t.len(),
                    self.elements.len()
                )));
            }
        }
        Ok(())
    }
}
