//! Symplectic groupoids of Poisson manifolds, built from the reduced phase
//! space of the Poisson sigma model on a strip.

pub mod error;
pub mod expr;
pub mod groupoid2d;
pub mod lie_dual;
pub mod pathspace;
pub mod poisson;
pub mod radial3d;

pub use error::{Error, Result};
