//! Spherical place recognition and hierarchical global re-localization over
//! overhead imagery.

pub mod descriptor;
pub mod error;
pub mod eval;
pub mod geo;
pub mod localize;
pub mod loss;
pub mod orientation;
pub mod sphere;

pub use error::{Error, Result};
