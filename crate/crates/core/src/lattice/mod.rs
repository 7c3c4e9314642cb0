//! Polynomial families, their relation lattices and the subtorus `H`.

pub mod hnf;
pub mod poly;
pub mod subtorus;

pub use poly::{is_relation, parse_family, IntPolynomial};
pub use subtorus::{
    exact_box_measure, haar_box_measure, polytope_volume, relation_lattice, subtorus_param, MeasureEstimate,
    RelationLattice, SubtorusH, TorusPoint,
};
