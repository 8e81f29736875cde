//! Link-level simulation of SVD-based hybrid-precoded single-user MIMO links
//! impaired by Gaussian phase noise under a common local oscillator.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: clustered Saleh-Valenzuela channels with uniform linear arrays.
//! - [`precoding`]: fully digital SVD reference, PE-AltMin analog stage and the
//!   SVD-derived digital stage with its power normalisation.
//! - [`phasenoise`]: Gaussian phase noise on a shared oscillator, received-signal
//!   model and pilot-based phase tracking.
//! - [`modulation`]: unit-energy QAM and polar QAM constellations.
//! - [`detection`]: Euclidean and polar-metric symbol detectors.
//! - [`analytics`]: closed-form and semi-analytical rate and error expressions.
//! - [`montecarlo`]: seeded, worker-count invariant BER and SE sweeps.
//!
//! [`config`], [`dump`] and [`validate`] hold the experiment files, the binary
//! channel dump and the self-check suite used by the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod channel;
pub mod config;
pub mod detection;
pub mod dump;
mod error;
pub mod linalg;
pub mod modulation;
pub mod montecarlo;
pub mod phasenoise;
pub mod precoding;
pub mod validate;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
