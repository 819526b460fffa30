//! Ensemble inference of atomic properties, dipole reconstruction and
//! informed-versus-blind molecular property experiments.

mod dipole;
mod ensemble;
mod experiment;

pub use dipole::{dipole_identity, reconstruct_dipole, DipoleEstimate, DipoleIdentity};
pub use ensemble::{
    best_of_repeat, infer_qta, read_inferred_csv, write_inferred_csv, Aggregation, Candidate, Ensemble,
    EnsembleMember, EnsembleSpec, InferredMolecule,
};
pub use experiment::{
    experiment_splits, paired_comparison, run_molecular_experiment, stratum, write_parity_csv, CellSplit,
    ExperimentGrid, ExperimentOutput, Mode, MolecularExperiment, ParityRow,
};
