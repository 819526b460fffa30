//! Geometric primitives shared by every other module: Cartesian vectors,
//! traceless symmetric rank-2 tensors in the five-component convention,
//! proper rotations and the radial/angular basis expansions used by the
//! network filters.

mod basis;
mod rotation;
mod tensor;

pub use basis::{legendre_basis, rbf_basis, rbf_basis_into};
pub use rotation::{sample_rotation, Rotation};
pub use tensor::{cos_gyration, gyration_tensor, Traceless5, Vec3};

/// 1 Å expressed in Bohr.
pub const BOHR_PER_ANGSTROM: f64 = 1.889_726_125_457_828_1;
/// 1 e·Bohr expressed in Debye.
pub const DEBYE_PER_AU: f64 = 2.541_746_451_9;
