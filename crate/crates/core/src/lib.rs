//! Simulation kernels for the Erdős–Rényi critical window and the Reed-Frost
//! epidemic it encodes.
//!
//! The crate is `no_std` (it needs `alloc`) and has no I/O. It samples the
//! discrete objects (random graphs, breadth-first explorations, cousin
//! statistics, Reed-Frost height profiles), simulates their continuum limits
//! (Brownian motion with parabolic drift, the absorbed square-root diffusion
//! and its Lamperti time change, the deterministic curves of the general
//! window) and provides the statistics used to compare the two.
//!
//! All randomness flows through [`RngStream`], a keyed, counter-based stream
//! derived from `(seed, replicate, label)`, so every result is reproducible
//! and replicate-parallel work needs no coordination.
//!
//! Floating-point transcendental functions go through `libm` so that results
//! do not depend on the platform's C library.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod chain;
pub mod continuum;
mod error;
pub mod graph;
pub mod moments;
mod rng;
mod window;

pub use error::Error;
pub use rng::RngStream;
pub use window::{derive_k, edge_probability, CriticalWindow, RunConfig};

pub type Result<T, E = Error> = core::result::Result<T, E>;
