//! Synthetic benchmarks: random relations with prescribed algebraic
//! properties, and small kinship worlds.

pub mod families;
pub mod properties;

pub use families::{FamilySplit, FamilyTree, Kinship, Person, Sex};
pub use properties::{PropertyCombo, PropertyReport, Reflexivity, SignMatrix, Symmetry};
