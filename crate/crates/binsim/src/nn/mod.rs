//! Minimal reverse-mode autodiff over `ndarray` f64 matrices.
//!
//! The neural pipeline builds a fresh tape per forward pass (the graph
//! structure changes per input pair), so the tape is a plain growable vec
//! of nodes with recorded operations and a single backward sweep.

mod adam;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use params::{GradSet, ParamSet};
pub use tape::{Tape, VarId};
