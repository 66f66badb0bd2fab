//! Multipoint flux mixed finite elements (MFMFE) for slightly compressible
//! single-phase Darcy flow.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror
// the component formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod error;
pub mod fem;
pub mod gauss;
pub mod io;
pub mod mesh;
pub mod physics;
pub mod quadrature;
pub mod random_field;
pub mod solver;
pub mod sparse;
pub mod verification;

pub use error::{Error, Result};
