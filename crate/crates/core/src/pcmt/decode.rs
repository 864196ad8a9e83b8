//! Hash-aware layer decoding and incorrect-coding proofs.

use std::collections::BTreeMap;

use crate::codec::{peel, Chunk, PeelEnd};
use crate::error::{Error, Result};
use crate::hash::{hash_symbol, Digest, HASH_BYTES};
use crate::polar_graph::{CnId, VnId};

use super::params::{Coords, PcmtLayout};
use super::proof::{verify_inclusion, DataPath, MerkleProof, PathCheck, PathStep};
use super::wire::{put_coords, Reader};

/// Evidence that a committed symbol violates a check node of its layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IcProof {
    pub layer: u32,
    /// Check node in factor-graph coordinates.
    pub cn: CnId,
    /// The `d - 1` symbols other than the disputed one.
    pub present: Vec<(Coords, Chunk)>,
    /// One data path per CN neighbor, in neighbor order.
    pub paths: Vec<DataPath>,
}

/// Erasures left when a layer's decoder stalls, in CMT coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerStuck {
    pub layer: u32,
    pub unresolved: Vec<Coords>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerOutcome {
    /// All intermediate symbols of the layer, (column, CMT row) order.
    Decoded(Vec<Chunk>),
    IncorrectCoding(IcProof),
    Stuck(LayerStuck),
}

/// A base-layer symbol served to a sampler, with its proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub coords: Coords,
    pub symbol: Chunk,
    pub proof: MerkleProof,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeOutcome {
    /// Every layer's symbols, layer 1 first.
    Decoded(Vec<Vec<Chunk>>),
    IncorrectCoding(IcProof),
    Stuck(LayerStuck),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecode {
    pub outcome: TreeOutcome,
    /// Samples dropped because their inclusion proof failed.
    pub rejected: Vec<Coords>,
}

fn vn_coords(layout: &PcmtLayout, j: u32, v: VnId) -> Coords {
    Coords::new(j, v.column, layout.layer(j).spec.fg_to_cmt(v.row as usize) as u32)
}

fn build_ic_proof(
    layout: &PcmtLayout,
    j: u32,
    cn: usize,
    absent: usize,
    values: &[Option<Chunk>],
    upper: &[Vec<Chunk>],
) -> Result<IcProof> {
    let graph = &layout.layer(j).graph;
    let neighbors = graph.constraint(cn).neighbors();
    let mut present = Vec::with_capacity(neighbors.len() - 1);
    let mut paths = Vec::with_capacity(neighbors.len());
    for &v in neighbors {
        let coords = vn_coords(layout, j, graph.vn_id(v as usize));
        if v as usize != absent {
            present.push((coords, values[v as usize].clone().expect("CN neighbors are resolved")));
        }
        paths.push(DataPath::from_layers(layout, upper, coords)?);
    }
    Ok(IcProof { layer: j, cn: graph.cn_id(cn), present, paths })
}

/// Decodes layer `j` from the known rightmost symbols (by CMT row), checking
/// every peeled symbol against `expected` (all `N_j (⌈log N_j⌉ + 1)` hashes).
/// `upper` holds the already decoded layers `1..j` for building proofs.
/// Known symbols whose hash disagrees with `expected` are ignored.
pub fn decode_layer(
    layout: &PcmtLayout,
    j: u32,
    expected: &[Digest],
    known: &[(u32, Chunk)],
    upper: &[Vec<Chunk>],
) -> Result<LayerOutcome> {
    if j == 0 || j > layout.n_layers() {
        return Err(Error::CoordsOutOfRange(format!("layer {j}")));
    }
    let layer = layout.layer(j);
    if expected.len() != layer.symbol_count() {
        return Err(Error::InvalidParameter(format!(
            "layer {j} needs {} expected hashes, got {}",
            layer.symbol_count(),
            expected.len()
        )));
    }
    if upper.len() != j as usize - 1 {
        return Err(Error::InvalidParameter(format!("layer {j} needs {} decoded upper layers", j - 1)));
    }
    let graph = &layer.graph;
    let spec = &layer.spec;
    let n = layer.n;
    let cmt_index = |vn: usize| {
        let column = vn / n;
        column * n + spec.fg_to_cmt(vn % n + 1) - 1
    };

    let mut values: Vec<Option<Chunk>> = vec![None; graph.vn_count()];
    let top = layer.top_column();
    for (row, chunk) in known {
        let c = Coords::new(j, top, *row);
        layout.check(c)?;
        if chunk.len() == layer.symbol_bytes && hash_symbol(chunk) == expected[layout.symbol_index(c)] {
            values[graph.vn_index(VnId::new(top, spec.cmt_to_fg(*row as usize) as u32))] = Some(chunk.clone());
        }
    }
    for &row in spec.frozen() {
        values[graph.vn_index(VnId::new(1, row as u32))] = Some(Chunk::zero(layer.symbol_bytes));
    }

    let (end, _) = peel(graph, &mut values, layer.symbol_bytes, |vn, chunk| hash_symbol(chunk) == expected[cmt_index(vn)]);
    match end {
        PeelEnd::Complete => {
            let mut symbols = vec![Chunk::default(); layer.symbol_count()];
            for (vn, value) in values.into_iter().enumerate() {
                symbols[cmt_index(vn)] = value.expect("complete");
            }
            Ok(LayerOutcome::Decoded(symbols))
        }
        PeelEnd::Stuck(left) => Ok(LayerOutcome::Stuck(LayerStuck {
            layer: j,
            unresolved: left.into_iter().map(|v| vn_coords(layout, j, graph.vn_id(v))).collect(),
        })),
        PeelEnd::Rejected { vn, cn } => build_ic_proof(layout, j, cn, vn, &values, upper).map(LayerOutcome::IncorrectCoding),
        PeelEnd::Inconsistent(cn) => {
            // Dispute any neighbor other than a frozen input zero.
            let absent = graph
                .constraint(cn)
                .neighbors()
                .iter()
                .map(|&v| v as usize)
                .find(|&v| v >= n || !spec.is_frozen(v + 1))
                .expect("every CN reaches column 2");
            build_ic_proof(layout, j, cn, absent, &values, upper).map(LayerOutcome::IncorrectCoding)
        }
    }
}

/// Hashes of layer `j`'s symbols as committed by the decoded layer `j - 1`.
fn expected_from_parent(layout: &PcmtLayout, j: u32, parent: &[Chunk]) -> Vec<Digest> {
    let layer = layout.layer(j);
    let parent_top = layout.layer(j - 1).top_column();
    let mut out = vec![[0u8; HASH_BYTES]; layer.symbol_count()];
    for column in 1..=layer.columns() as u32 {
        for row in 1..=layer.n as u32 {
            let c = Coords::new(j, column, row);
            let (prow, slot) = layout.parent_slot(c);
            let data = &parent[layout.symbol_index(Coords::new(j - 1, parent_top, prow))];
            out[layout.symbol_index(c)].copy_from_slice(&data[slot * HASH_BYTES..(slot + 1) * HASH_BYTES]);
        }
    }
    out
}

/// Decodes the whole tree top-down from sampled base-layer symbols. Symbols
/// of upper layers come from the samples' proofs.
pub fn decode_tree(layout: &PcmtLayout, root: &[Digest], samples: &[Sample]) -> Result<TreeDecode> {
    if root.len() != layout.root_len() {
        return Err(Error::InvalidParameter(format!("root has {} hashes, expected {}", root.len(), layout.root_len())));
    }
    let l = layout.n_layers();
    let mut known: Vec<BTreeMap<u32, Chunk>> = vec![BTreeMap::new(); l as usize];
    let mut rejected = Vec::new();
    for s in samples {
        let c = s.coords;
        let is_base = c.layer == l && c.column == layout.base().top_column();
        if !is_base || !verify_inclusion(layout, root, &s.symbol, c, &s.proof) {
            rejected.push(c);
            continue;
        }
        known[l as usize - 1].insert(c.row, s.symbol.clone());
        for (idx, pl) in s.proof.layers.iter().enumerate() {
            known[idx].insert(pl.data_row, pl.data.clone());
            known[idx].insert(pl.parity_row, pl.parity.clone());
        }
    }

    let mut decoded: Vec<Vec<Chunk>> = Vec::with_capacity(l as usize);
    for j in 1..=l {
        let expected = match decoded.last() {
            None => root.to_vec(),
            Some(parent) => expected_from_parent(layout, j, parent),
        };
        let knowns: Vec<(u32, Chunk)> = std::mem::take(&mut known[j as usize - 1]).into_iter().collect();
        match decode_layer(layout, j, &expected, &knowns, &decoded)? {
            LayerOutcome::Decoded(symbols) => decoded.push(symbols),
            LayerOutcome::IncorrectCoding(p) => return Ok(TreeDecode { outcome: TreeOutcome::IncorrectCoding(p), rejected }),
            LayerOutcome::Stuck(s) => return Ok(TreeDecode { outcome: TreeOutcome::Stuck(s), rejected }),
        }
    }
    Ok(TreeDecode { outcome: TreeOutcome::Decoded(decoded), rejected })
}

impl IcProof {
    /// CMT coordinates of the check node's neighbors, in neighbor order.
    fn neighbor_coords(&self, layout: &PcmtLayout) -> Option<Vec<Coords>> {
        if self.layer == 0 || self.layer > layout.n_layers() {
            return None;
        }
        let graph = &layout.layer(self.layer).graph;
        if !graph.contains_cn(self.cn) {
            return None;
        }
        Some(graph.cn_neighbors(self.cn).into_iter().map(|v| vn_coords(layout, self.layer, v)).collect())
    }

    /// Wire form: header, present symbols, then one path per neighbor. A
    /// path identical to an earlier one is sent as a back-reference.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [self.layer, self.cn.column, self.cn.row] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.push(self.present.len() as u8);
        for (c, s) in &self.present {
            put_coords(&mut out, *c);
            out.extend_from_slice(s);
        }
        for (m, path) in self.paths.iter().enumerate() {
            put_coords(&mut out, path.coords);
            match self.paths[..m].iter().position(|p| p.steps == path.steps) {
                Some(earlier) => {
                    out.push(1);
                    out.push(earlier as u8);
                }
                None => {
                    out.push(0);
                    for step in &path.steps {
                        out.extend_from_slice(&step.row.to_be_bytes());
                        out.extend_from_slice(&step.data);
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(layout: &PcmtLayout, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let layer = r.u32()?;
        let cn = CnId::new(r.u32()?, r.u32()?);
        if layer == 0 || layer > layout.n_layers() {
            return Err(Error::Malformed(format!("layer {layer} out of range")));
        }
        let count = r.u8()? as usize;
        if !(1..=2).contains(&count) {
            return Err(Error::Malformed(format!("{count} present symbols")));
        }
        let size = layout.layer(layer).symbol_bytes;
        let mut present = Vec::with_capacity(count);
        for _ in 0..count {
            let c = r.coords()?;
            present.push((c, Chunk::from(r.bytes(size)?)));
        }
        let mut paths: Vec<DataPath> = Vec::with_capacity(count + 1);
        for _ in 0..=count {
            let coords = r.coords()?;
            if !layout.contains(coords) {
                return Err(Error::Malformed(format!("path coordinates {coords} out of range")));
            }
            let steps = match r.u8()? {
                0 => (1..coords.layer)
                    .map(|j| Ok(PathStep { row: r.u32()?, data: r.bytes(layout.layer(j).symbol_bytes)?.into() }))
                    .collect::<Result<Vec<_>>>()?,
                1 => {
                    let earlier = r.u8()? as usize;
                    paths.get(earlier).ok_or_else(|| Error::Malformed("dangling path reference".into()))?.steps.clone()
                }
                tag => return Err(Error::Malformed(format!("unknown path tag {tag}"))),
            };
            paths.push(DataPath { coords, steps });
        }
        r.finish()?;
        Ok(Self { layer, cn, present, paths })
    }
}

/// Accepts iff the present symbols are committed, and the value they force
/// on the remaining neighbor is not.
pub fn verify_ic_proof(layout: &PcmtLayout, root: &[Digest], proof: &IcProof) -> bool {
    let Some(neighbors) = proof.neighbor_coords(layout) else { return false };
    let d = neighbors.len();
    if proof.present.len() != d - 1 || proof.paths.len() != d {
        return false;
    }
    if proof.paths.iter().zip(&neighbors).any(|(p, c)| p.coords != *c) {
        return false;
    }
    let size = layout.layer(proof.layer).symbol_bytes;
    let mut used = vec![false; d];
    let mut reconstructed = Chunk::zero(size);
    for (c, symbol) in &proof.present {
        let Some(m) = neighbors.iter().position(|n| n == c) else { return false };
        if used[m] || symbol.len() != size {
            return false;
        }
        used[m] = true;
        if proof.paths[m].check(layout, root, &hash_symbol(symbol)) != PathCheck::Valid {
            return false;
        }
        reconstructed.xor_assign(symbol);
    }
    let absent = used.iter().position(|u| !u).expect("d - 1 of d used");
    proof.paths[absent].check(layout, root, &hash_symbol(&reconstructed)) == PathCheck::LeafMismatch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcmt::{Corruption, PcmtParams, PcmtTree};

    fn params() -> PcmtParams {
        PcmtParams::new(16, 1, 2, 4, 2, 8)
    }

    fn block() -> Vec<u8> {
        (0..128u32).map(|i| (i * 31 + 7) as u8).collect()
    }

    fn samples(tree: &PcmtTree, rows: impl Iterator<Item = u32>) -> Vec<Sample> {
        let l = tree.layout().n_layers();
        let top = tree.layout().base().top_column();
        rows.map(|row| {
            let c = Coords::new(l, top, row);
            Sample { coords: c, symbol: tree.symbol(c).unwrap().clone(), proof: tree.merkle_proof(c).unwrap() }
        })
        .collect()
    }

    fn eligible(tree: &PcmtTree) -> Vec<u32> {
        let spec = &tree.layout().base().spec;
        (1..=spec.n()).filter(|&x| spec.cmt_to_fg(x) <= spec.eligible_rows()).map(|x| x as u32).collect()
    }

    #[test]
    fn honest_layer_round_trip() {
        let tree = PcmtTree::build(params(), &block()).unwrap();
        let layout = tree.layout();
        let out = decode_layer(layout, 1, tree.root(), &tree.coded_symbols(1), &[]).unwrap();
        assert_eq!(out, LayerOutcome::Decoded(tree.layer_symbols(1).to_vec()));
    }

    #[test]
    fn honest_tree_decodes() {
        let tree = PcmtTree::build(params(), &block()).unwrap();
        let res = decode_tree(tree.layout(), tree.root(), &samples(&tree, eligible(&tree).into_iter())).unwrap();
        assert!(res.rejected.is_empty());
        assert_eq!(res.outcome, TreeOutcome::Decoded(tree.layers().to_vec()));
    }

    #[test]
    fn bad_samples_are_rejected() {
        let tree = PcmtTree::build(params(), &block()).unwrap();
        let mut s = samples(&tree, eligible(&tree).into_iter());
        let mut bytes = s[0].symbol.to_vec();
        bytes[0] ^= 1;
        s[0].symbol = bytes.into();
        let res = decode_tree(tree.layout(), tree.root(), &s).unwrap();
        assert_eq!(res.rejected, vec![s[0].coords]);
    }

    #[test]
    fn corrupted_parity_yields_valid_proof_at_adjacent_cn() {
        for index in 0..8 {
            let tree = PcmtTree::build_corrupted(params(), &block(), Corruption::parity(
                &crate::pcmt::PcmtLayout::new(params()).unwrap(),
                2,
                index,
            )
            .unwrap())
            .unwrap();
            let layout = tree.layout();
            let res = decode_tree(layout, tree.root(), &samples(&tree, eligible(&tree).into_iter())).unwrap();
            let TreeOutcome::IncorrectCoding(proof) = res.outcome else { panic!("index {index}: {:?}", res.outcome) };
            assert_eq!(proof.layer, 2);
            let row = layout.base().k as u32 + 1 + index;
            let bad = VnId::new(layout.base().top_column(), layout.base().spec.cmt_to_fg(row as usize) as u32);
            assert!(layout.base().graph.cn_neighbors(proof.cn).contains(&bad));
            assert!(verify_ic_proof(layout, tree.root(), &proof));
            let back = IcProof::from_bytes(layout, &proof.to_bytes()).unwrap();
            assert_eq!(back, proof);
        }
    }

    #[test]
    fn forged_proofs_fail() {
        let layout = crate::pcmt::PcmtLayout::new(params()).unwrap();
        let honest = PcmtTree::build(params(), &block()).unwrap();
        let tree = PcmtTree::build_corrupted(params(), &block(), Corruption::parity(&layout, 2, 0).unwrap()).unwrap();
        let res = decode_tree(tree.layout(), tree.root(), &samples(&tree, eligible(&tree).into_iter())).unwrap();
        let TreeOutcome::IncorrectCoding(proof) = res.outcome else { panic!() };

        let absent = proof.paths.iter().position(|p| !proof.present.iter().any(|(c, _)| *c == p.coords)).unwrap();
        let mut swapped = proof.clone();
        swapped.paths[absent] = honest.data_path(proof.paths[absent].coords).unwrap();
        assert!(!verify_ic_proof(tree.layout(), tree.root(), &swapped));

        let mut ghost = proof.clone();
        ghost.cn = CnId::new(99, 1);
        assert!(!verify_ic_proof(tree.layout(), tree.root(), &ghost));

        // The same check node in the honest tree proves nothing.
        assert!(!verify_ic_proof(honest.layout(), honest.root(), &proof));
    }

    #[test]
    fn hiding_stalls_base_layer() {
        let tree = PcmtTree::build(params(), &block()).unwrap();
        let spec = &tree.layout().base().spec;
        let graph = &tree.layout().base().graph;
        let hide: Vec<u32> =
            graph.leaf_set(spec.argmin_info_leaf()).unwrap().into_iter().map(|r| spec.fg_to_cmt(r) as u32).collect();
        let rows = eligible(&tree).into_iter().filter(|r| !hide.contains(r));
        let res = decode_tree(tree.layout(), tree.root(), &samples(&tree, rows)).unwrap();
        match res.outcome {
            TreeOutcome::Stuck(s) => assert_eq!(s.layer, 2),
            other => panic!("{other:?}"),
        }
    }
}
