use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Vec3, DEBYE_PER_AU};
use crate::ingest::MoleculeRecord;
use crate::stats::r2;

/// Molecular dipole as the sum of atomic contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleEstimate {
    /// e·Bohr.
    pub vector: Vec3,
    /// e·Bohr.
    pub magnitude_au: f64,
    pub magnitude_debye: f64,
}

pub fn reconstruct_dipole(atomic_mu: &[Vec3]) -> DipoleEstimate {
    let vector = atomic_mu.iter().fold(Vec3::ZERO, |acc, m| acc + *m);
    let magnitude_au = vector.norm();
    DipoleEstimate { vector, magnitude_au, magnitude_debye: magnitude_au * DEBYE_PER_AU }
}

/// Agreement between summed ground-truth atomic dipoles and the tabulated
/// molecular dipole magnitude (Debye) over molecules carrying both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleIdentity {
    pub n: usize,
    pub r2: f64,
    pub max_abs_error_debye: f64,
}

pub fn dipole_identity(molecules: &[&MoleculeRecord]) -> Result<DipoleIdentity> {
    let mut truth = Vec::new();
    let mut recon = Vec::new();
    for m in molecules {
        if let (Some(t), Some(mu)) = (&m.targets, m.qm9.mu) {
            let mus: Vec<Vec3> = t.iter().map(|a| a.mu).collect();
            truth.push(mu);
            recon.push(reconstruct_dipole(&mus).magnitude_debye);
        }
    }
    if truth.len() < 2 {
        return Err(Error::invalid("dipole identity needs at least two molecules with targets and dipoles"));
    }
    let max_abs_error_debye = truth.iter().zip(&recon).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(DipoleIdentity { n: truth.len(), r2: r2(&truth, &recon)?, max_abs_error_debye })
}
