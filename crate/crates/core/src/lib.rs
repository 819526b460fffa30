//! Toolkit for learning quantum-topological atomic (QTA) properties.
//!
//! The crate covers the whole pipeline: ingesting atomic-property summaries
//! and QM9-style geometries, clustering atomic environments with SOAP
//! descriptors and density-based clustering to build leakage-free holdouts,
//! scaffold-grouped 5×5 cross-validation, the QT-Net message-passing model
//! with exact reverse-mode gradients, a repeated-measures statistics engine,
//! and downstream molecular experiments including dipole reconstruction.

pub mod downstream;
pub mod environments;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod provenance;
mod quadrature;
pub mod qtnet;
pub mod splits;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
