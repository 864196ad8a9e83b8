//! Coded Merkle trees over polar factor graphs: construction, inclusion proofs, hash-aware
//! decoding and incorrect-coding proofs.

mod decode;
mod params;
mod proof;
mod tree;
mod wire;

pub use decode::{
    decode_layer, decode_tree, verify_ic_proof, IcProof, LayerOutcome, LayerStuck, Sample, TreeDecode, TreeOutcome,
};
pub use params::{derive_layer_sizes, Coords, LayerLayout, PcmtLayout, PcmtParams};
pub use proof::{verify_inclusion, DataPath, MerkleProof, PathCheck, PathStep, ProofLayer};
pub use tree::{Corruption, PcmtTree};
