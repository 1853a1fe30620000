pub mod assembly;
pub mod checks;
pub mod elements;
pub mod error;
pub mod fields;
pub mod ma_solver;
pub mod mesh;
pub mod mms;
pub mod quadrature;
pub mod simulation;
pub mod study;
pub mod sparse;
pub mod transport;

pub use error::{Error, Result};
