//! Pseudorandom versus simulated-quantum randomness inside machine-learning
//! training.
//!
//! An [`entropy::EntropySource`] supplies every random decision made by the
//! learners: weight initialization of dense networks ([`neural`]), split
//! attribute choice and bagging in random trees and forests ([`trees`]), and
//! data shuffling ([`datasets`]). The quantum-simulated source measures a
//! Hadamard-prepared qubit ([`qsim`]) per bit. [`randtest`] checks that both
//! kinds look uniform, and [`bench`] runs the comparison protocols.

pub mod bench;
pub mod datasets;
pub mod entropy;
pub mod neural;
pub mod qsim;
pub mod randtest;
pub mod trees;

pub use entropy::{BitRecord, EntropyConfig, EntropyKind, EntropySource};

use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of `text`.
pub(crate) fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}
