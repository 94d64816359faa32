//! Finite-N Langevin dynamics of soft-spherical p-spin glasses, the
//! limiting two-time equations for their correlation and response, and
//! the oracles used to check one against the other.

pub mod ck;
pub mod compare;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod langevin;
pub mod model;
pub mod oracles;

pub use error::{Error, Result};
