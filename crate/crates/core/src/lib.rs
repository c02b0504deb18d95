//! Compressed sensing with partial random symmetric Bernoulli measurement
//! matrices.
//!
//! The crate covers the whole pipeline: seeded generation of the symmetric
//! sign ensemble and four baseline ensembles, exact and Monte Carlo checks of
//! the concentration behaviour of the symmetric ensemble, brute-force
//! restricted isometry constants, an ADMM basis pursuit / BPDN solver with
//! exact small-instance oracles, and the sweep harness that reproduces the
//! success-rate, noise and image reconstruction experiments.

pub mod cli;
pub mod concentration;
pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod imageio;
pub mod linalg;
pub mod rip;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
