//! Quantum maps on the torus: Loschmidt echo and purity decay under
//! phase-space decoherence channels.
//!
//! - [`hilbert`]: torus Hilbert space, coherent states, translations, chord
//!   functions and purity.
//! - [`dynamics`]: the perturbed cat map and its split-operator propagator.
//! - [`echo`]: Loschmidt echo curves and ensemble averages.
//! - [`decoherence`]: GDM, DC, LDM and mixture channels, purity evolution.
//! - [`analysis`]: decay-rate fits, analytic rates and sweeps.
//! - [`config`] / [`runner`]: the experiment runner behind the CLI.

pub mod analysis;
pub mod config;
pub mod decoherence;
pub mod dynamics;
pub mod echo;
pub mod error;
pub mod hilbert;
pub mod runner;
pub mod selftest;

pub use error::{Error, Result};
