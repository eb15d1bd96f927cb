//! Simulation and analysis of a single G-center emitter coupled to a silicon
//! photonic-crystal cavity.
//!
//! Photon time tags are generated from a three-level kinetic model
//! ([`emitter`]) whose ZPL channel is enhanced by a detuned cavity
//! ([`cavity`]); the streams are analysed by correlation and lifetime
//! histogramming ([`stats`]) and nonlinear fits ([`fitting`]). [`bands`]
//! computes TE band structures of the triangular-lattice crystal.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod cavity;
pub mod config;
pub mod emitter;
pub mod error;
pub mod fitting;
pub mod linalg;
pub mod pipeline;
pub mod quantities;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
