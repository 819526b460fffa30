use crate::geometry::Rotation;
use crate::ingest::MoleculeRecord;

use super::graph::GraphInstance;

/// Rotates positions and the orientation-bearing targets (μ, Q) of a molecule.
pub fn augment(mol: &MoleculeRecord, rot: &Rotation) -> MoleculeRecord {
    let mut out = mol.clone();
    for p in &mut out.positions {
        *p = rot.rotate_vec(*p);
    }
    if let Some(ts) = &mut out.targets {
        for t in ts {
            t.mu = rot.rotate_vec(t.mu);
            t.quad = rot.rotate5(t.quad);
        }
    }
    out
}

impl GraphInstance {
    /// Same connectivity with all positions rotated by `rot`.
    pub fn rotated(&self, rot: &Rotation) -> GraphInstance {
        GraphInstance {
            species: self.species.clone(),
            positions: self.positions.iter().map(|p| rot.rotate_vec(*p)).collect(),
            edges: self.edges.clone(),
            rhat: self.rhat.iter().map(|u| rot.rotate_vec(*u)).collect(),
            dist: self.dist.clone(),
            gyration: self.gyration.iter().map(|g| rot.rotate5(*g)).collect(),
        }
    }
}
