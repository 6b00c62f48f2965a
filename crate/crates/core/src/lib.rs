//! Heralded entanglement of coherent-state cats and its decay under decoherence.

pub mod analysis;
pub mod apparatus;
pub mod branch;
pub mod chsh;
pub mod cli;
pub mod closed_form;
pub mod config;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod mode;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};
pub use mode::{ModeId, ModeKind};
