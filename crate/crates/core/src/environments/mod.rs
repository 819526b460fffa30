//! Atomic-environment descriptors, clustering and holdout construction.

mod harmonics;
mod hdbscan;
mod labels;
mod pca;
mod soap;

pub use hdbscan::{hdbscan_cluster, ClusterLabels, ClusterParams};
pub use labels::{
    absorbed_labels, build_holdout, cooccurrence, expand_held_labels, label_atoms, AtomLabels, ClusterReport,
    Cooccurrence, ElementClustering, ElementReport, EnvLabel,
};
pub use pca::{pca_fit, pca_transform, PcaModel, PcaTarget};
pub use soap::{soap_descriptor, SoapCalculator, SoapParams};
