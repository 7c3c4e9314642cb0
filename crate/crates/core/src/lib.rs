//! Shift certificates for Raimi-type partitions.
//!
//! The crate builds explicit partitions of `N^k`, `Z_N`, finite abelian groups
//! and `SL2(F_q)`, and for a given finite coloring computes a shift that makes
//! one color class meet every piece, together with counts that can be checked
//! independently.

pub mod coloring;
pub mod cyclic;
pub mod error;
pub mod fs;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod sl2;
pub mod torus;
pub mod weyl;

pub use error::{Error, Result};
