//! Trace finite elements on cut background meshes with face and surface
//! normal-derivative stabilization.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
