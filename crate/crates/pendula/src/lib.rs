//! Dual-engine simulator for two magnetically coupled pendula that behave
//! as a driven two-level system.
//!
//! The crate integrates the full nonlinear Newton dynamics of the pendula,
//! integrates the matching Schrödinger-like envelope equation in either
//! basis, and carries the complete signal-processing chain (time-scale
//! separation, envelope extraction, spectra, Husimi maps) used to turn raw
//! deflection traces into mode occupations. Scenario runners reproduce the
//! standard driven-qubit experiments: Rabi scans, single Landau-Zener
//! passages and Landau-Zener-Stückelberg-Majorana interference fans.

pub mod error;
pub mod experiments;
pub mod model;
pub mod newton;
pub mod signal;
pub mod tls;

pub use error::{Error, Result};
