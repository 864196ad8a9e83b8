//! Coded Merkle trees over polar factor graphs, for data-availability sampling.
//!
//! The crate builds polar factor graphs of arbitrary length, selects frozen
//! rows, encodes and peels symbols over those graphs, commits to the coded
//! layers with a hash tree, and produces inclusion and incorrect-coding
//! proofs. [`attack_sim`] and [`metrics`] evaluate the resulting scheme.

pub mod attack_sim;
pub mod codec;
pub mod error;
pub mod freezing;
pub mod hash;
pub mod metrics;
pub mod pcmt;
pub mod polar_graph;

pub use codec::{Assignment, Chunk, DecodeOutcome, StuckReport};
pub use error::{Error, Result};
pub use freezing::{CodeSpec, FreezeAlgorithm};
pub use pcmt::{Coords, IcProof, MerkleProof, PcmtLayout, PcmtParams, PcmtTree};
pub use num_rational::Ratio;
pub use polar_graph::{CnId, FactorGraph, LeafSizes, VnId};
