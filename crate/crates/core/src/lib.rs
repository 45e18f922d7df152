//! Sparse superposition codes (SPARCs) over the AWGN channel with approximate
//! message passing (AMP) decoding.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] and [`power`] hold the code parameters and the exponentially
//!   decaying power allocation.
//! * [`codebook`], [`design`] and [`channel`] map bits to codewords, build the
//!   design matrix and add Gaussian noise.
//! * [`amp`] is the decoder itself.
//! * [`se`] computes the state-evolution recursion and its analytical lower
//!   bounds, and [`bounds`] evaluates the finite-length deviation bound.
//! * [`sim`] runs seeded Monte Carlo experiments on top of everything else.
//!
//! All rates are in nats per channel use unless a name says otherwise.

pub mod amp;
pub mod bounds;
pub mod channel;
pub mod codebook;
pub mod design;
mod error;
pub mod hadamard;
pub mod params;
pub mod power;
pub mod rng;
pub mod se;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use params::CodeParams;
pub use power::PowerAllocation;
