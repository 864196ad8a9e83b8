//! Shared inputs for the benchmarks.

use pcmt_core::pcmt::{Coords, PcmtParams, PcmtTree, Sample};
use pcmt_core::Chunk;

/// Deterministic pseudo-random bytes.
pub fn bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut x = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            x as u8
        })
        .collect()
}

pub fn chunks(count: usize, len: usize, seed: u64) -> Vec<Chunk> {
    bytes(count * len, seed).chunks(len.max(1)).take(count).map(Chunk::from).collect()
}

/// Tree parameters used across benchmarks: 64 data chunks of 1 KiB.
pub fn tree_params() -> PcmtParams {
    PcmtParams::new(64, 1, 2, 4, 3, 1024)
}

/// Every eligible base symbol with its proof.
pub fn eligible_samples(tree: &PcmtTree) -> Vec<Sample> {
    let layout = tree.layout();
    let l = layout.n_layers();
    let top = layout.base().top_column();
    pcmt_core::attack_sim::eligible_positions(&layout.base().spec)
        .into_iter()
        .map(|row| {
            let c = Coords::new(l, top, row as u32);
            Sample { coords: c, symbol: tree.symbol(c).unwrap().clone(), proof: tree.merkle_proof(c).unwrap() }
        })
        .collect()
}
