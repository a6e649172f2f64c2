//! Finite element spaces, fields and assembly.

pub mod assemble;
pub mod field;
pub mod space;

pub use assemble::{
    assemble_b, assemble_covariant_form, assemble_current_load, assemble_external_load,
    assemble_scalar_mass, assemble_weighted_vector_mass,
};
pub use field::{ComplexField, VectorField};
pub use space::{shared_mesh, ScalarSpace, VectorSpace};
