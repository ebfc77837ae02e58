pub mod dirac;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod flow;
pub mod form;
pub mod gaussmap;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod ops;
pub mod spectral;
pub mod verify;
pub mod weierstrass;

pub use error::{Error, Result};
pub use field::{FieldKind, ScalarField};
pub use grid::{BoundaryMode, ComplexGrid};
