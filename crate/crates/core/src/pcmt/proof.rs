use crate::codec::Chunk;
use crate::error::{Error, Result};
use crate::hash::{hash_symbol, Digest, HASH_BYTES};

use super::params::{Coords, PcmtLayout};
use super::tree::step_for;
use super::wire::{put_coords, Reader};

/// One layer of a Merkle proof: the on-path data symbol and a parity sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofLayer {
    pub data_row: u32,
    pub data: Chunk,
    pub parity_row: u32,
    pub parity: Chunk,
}

/// Merkle proof of a PCMT symbol: one data and one parity symbol from each
/// layer above it, ascending by layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleProof {
    pub coords: Coords,
    pub layers: Vec<ProofLayer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathStep {
    pub row: u32,
    pub data: Chunk,
}

/// Data symbols only, as carried inside incorrect-coding proofs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPath {
    pub coords: Coords,
    pub steps: Vec<PathStep>,
}

/// Result of walking a path up to the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathCheck {
    /// Every link holds, including the leaf.
    Valid,
    /// The path itself authenticates but the leaf hash is not the committed one.
    LeafMismatch,
    /// Some link above the leaf fails, or the path is malformed.
    Broken,
}

fn slot_holds(symbol: &[u8], slot: usize, digest: &Digest) -> bool {
    symbol.get(slot * HASH_BYTES..(slot + 1) * HASH_BYTES) == Some(&digest[..])
}

/// Does the parent of `c` (given as a data symbol of layer `c.layer - 1` at
/// `parent_row`, or the root) commit to `digest`?
fn linked(layout: &PcmtLayout, root: &[Digest], c: Coords, digest: &Digest, parent: Option<(u32, &[u8])>) -> bool {
    if c.layer == 1 {
        return root.get(layout.root_slot(c.column, c.row)) == Some(digest);
    }
    let Some((parent_row, parent_data)) = parent else { return false };
    let (row, slot) = layout.parent_slot(c);
    row == parent_row && slot_holds(parent_data, slot, digest)
}

impl DataPath {
    pub(crate) fn from_layers(layout: &PcmtLayout, layers: &[Vec<Chunk>], c: Coords) -> Result<Self> {
        layout.check(c)?;
        Ok(Self { coords: c, steps: (1..c.layer).map(|j| step_for(layout, layers, j, c.row)).collect() })
    }

    fn well_formed(&self, layout: &PcmtLayout) -> bool {
        let c = self.coords;
        layout.contains(c)
            && self.steps.len() == c.layer as usize - 1
            && self.steps.iter().enumerate().all(|(idx, s)| {
                let j = idx as u32 + 1;
                s.row == layout.proof_data_row(j, c.row) && s.data.len() == layout.layer(j).symbol_bytes
            })
    }

    /// Walks from the leaf hash up to the root.
    pub fn check(&self, layout: &PcmtLayout, root: &[Digest], leaf: &Digest) -> PathCheck {
        if !self.well_formed(layout) || root.len() != layout.root_len() {
            return PathCheck::Broken;
        }
        let c = self.coords;
        let parent = |j: u32| (j >= 2).then(|| (self.steps[j as usize - 2].row, &self.steps[j as usize - 2].data[..]));
        let leaf_ok = linked(layout, root, c, leaf, parent(c.layer));
        for j in (1..c.layer).rev() {
            let step = &self.steps[j as usize - 1];
            let here = Coords::new(j, layout.layer(j).top_column(), step.row);
            if !linked(layout, root, here, &hash_symbol(&step.data), parent(j)) {
                return PathCheck::Broken;
            }
        }
        if leaf_ok {
            PathCheck::Valid
        } else {
            PathCheck::LeafMismatch
        }
    }

    pub fn encoded_len(&self) -> usize {
        12 + self.steps.iter().map(|s| 4 + s.data.len()).sum::<usize>()
    }
}

impl MerkleProof {
    pub fn data_path(&self) -> DataPath {
        DataPath {
            coords: self.coords,
            steps: self.layers.iter().map(|l| PathStep { row: l.data_row, data: l.data.clone() }).collect(),
        }
    }

    /// Data and parity symbols carried, `2 (j - 1)`.
    pub fn symbol_count(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_coords(&mut out, self.coords);
        for l in &self.layers {
            out.extend_from_slice(&l.data_row.to_be_bytes());
            out.extend_from_slice(&l.data);
            out.extend_from_slice(&l.parity_row.to_be_bytes());
            out.extend_from_slice(&l.parity);
        }
        out
    }

    pub fn from_bytes(layout: &PcmtLayout, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let proof = Self::read(layout, &mut r)?;
        r.finish()?;
        Ok(proof)
    }

    fn read(layout: &PcmtLayout, r: &mut Reader<'_>) -> Result<Self> {
        let coords = r.coords()?;
        if !layout.contains(coords) {
            return Err(Error::Malformed(format!("proof coordinates {coords} out of range")));
        }
        let layers = (1..coords.layer)
            .map(|j| {
                let size = layout.layer(j).symbol_bytes;
                Ok(ProofLayer {
                    data_row: r.u32()?,
                    data: r.bytes(size)?.into(),
                    parity_row: r.u32()?,
                    parity: r.bytes(size)?.into(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { coords, layers })
    }
}

/// Checks `symbol` at `coords` against the root through `proof`, including
/// every parity sample the proof carries.
pub fn verify_inclusion(layout: &PcmtLayout, root: &[Digest], symbol: &[u8], coords: Coords, proof: &MerkleProof) -> bool {
    if proof.coords != coords || !layout.contains(coords) || symbol.len() != layout.layer(coords.layer).symbol_bytes {
        return false;
    }
    if proof.data_path().check(layout, root, &hash_symbol(symbol)) != PathCheck::Valid {
        return false;
    }
    proof.layers.iter().enumerate().all(|(idx, l)| {
        let j = idx as u32 + 1;
        if l.parity_row != layout.proof_parity_row(j, coords.row) || l.parity.len() != layout.layer(j).symbol_bytes {
            return false;
        }
        let here = Coords::new(j, layout.layer(j).top_column(), l.parity_row);
        let parent = (j >= 2).then(|| (proof.layers[idx - 1].data_row, &proof.layers[idx - 1].data[..]));
        linked(layout, root, here, &hash_symbol(&l.parity), parent)
    })
}
