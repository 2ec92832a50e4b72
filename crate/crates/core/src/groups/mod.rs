//! Finite groups, matrix representations, constructive symmetry matrices and
//! the brute-force group cross-correlation used as the equivariance oracle.

mod group;
mod oracle;
mod rep;

pub use group::{FiniteGroup, GroupError};
pub use oracle::{
    build_symmetry_matrix, equivariance_error, group_correlation, standard_registry, RegisteredPair,
    SymmetryMatrixBlueprint,
};
pub use rep::{
    flip_representation, regular_representation, rotation_representation_2d, shift_representation,
    symmetric_natural_representation, tensor_product_rep, Interpolation, RepKind, Representation,
};
