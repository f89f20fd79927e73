//! Coherence distillation toolkit: maximal coherence and related measures,
//! the SIO and MIO fidelities of distilling a coherence bit, and simulations
//! of the filtering and block-measurement protocols.

pub mod cli;
pub mod distillation;
pub mod error;
pub mod io;
pub mod matrix;
pub mod measures;
pub mod protocols;
pub mod report;
pub mod sdp;
pub mod states;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, DensityMatrix};
