//! Parsing of source files into the canonical dataset.
//!
//! Supported inputs are the `.sumviz` subset documented in [`sumviz`],
//! QM9-style extended XYZ files, and a SMILES subset restricted to H, C, N
//! and O without stereochemistry or charges.

mod dataset;
mod record;
mod smiles;
pub mod sumviz;
mod xyz;

pub use dataset::{
    assemble_dataset, read_dataset, read_exclusions, write_dataset, AssemblyReport, Dataset, DatasetHeader, Units,
    IngestOptions,
};
pub use record::{AtomTargets, Element, MoleculeRecord, Qm9Props};
pub use smiles::{parse_smiles, BondOrder, GraphAtom, GraphBond, MolGraph};
pub use sumviz::{parse_sumviz, SumvizData, SumvizSentinels};
pub use xyz::{parse_xyz_extended, write_xyz_extended};
