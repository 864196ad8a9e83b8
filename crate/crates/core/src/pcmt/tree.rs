use crate::codec::{systematic_encode, Chunk};
use crate::error::{Error, Result};
use crate::hash::{hash_symbol, Digest, HASH_BYTES};
use crate::polar_graph::{ceil_log2, VnId};

use super::params::{derive_layer_sizes, Coords, PcmtLayout, PcmtParams};
use super::proof::{DataPath, MerkleProof, PathStep, ProofLayer};
use super::wire::Reader;

const CONTAINER_MAGIC: &[u8; 4] = b"PCMT";
const CONTAINER_VERSION: u16 = 1;

/// Overwrites one rightmost symbol after its layer is encoded and before the
/// parent layer is formed, so the commitment covers the bad value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Corruption {
    pub layer: u32,
    /// CMT row in the rightmost column.
    pub row: u32,
}

impl Corruption {
    /// The `index`-th (0-based) parity symbol of `layer`.
    pub fn parity(layout: &PcmtLayout, layer: u32, index: u32) -> Result<Self> {
        if layer == 0 || layer > layout.n_layers() {
            return Err(Error::CoordsOutOfRange(format!("layer {layer}")));
        }
        let l = layout.layer(layer);
        if index as usize >= l.n - l.k {
            return Err(Error::CoordsOutOfRange(format!("parity index {index} of layer {layer}")));
        }
        Ok(Self { layer, row: (l.k + 1) as u32 + index })
    }
}

/// All intermediate symbols of every layer plus the root hash list.
#[derive(Clone, Debug)]
pub struct PcmtTree {
    layout: PcmtLayout,
    /// `layers[j-1]` holds layer j in (column, CMT row) order.
    layers: Vec<Vec<Chunk>>,
    root: Vec<Digest>,
    original_len: u64,
}

/// Splits a parent layer's data symbols out of the child's full symbol list
/// (hash slot order: column-major, then `t` within the column).
fn form_parent(layout: &PcmtLayout, child_layer: u32, child: &[Chunk]) -> Vec<Chunk> {
    let parent = layout.layer(child_layer - 1);
    let layer = layout.layer(child_layer);
    let mut data = vec![vec![0u8; parent.symbol_bytes]; parent.k];
    for column in 1..=layer.columns() as u32 {
        for row in 1..=layer.n as u32 {
            let c = Coords::new(child_layer, column, row);
            let (prow, slot) = layout.parent_slot(c);
            let digest = hash_symbol(&child[layout.symbol_index(c)]);
            data[prow as usize - 1][slot * HASH_BYTES..(slot + 1) * HASH_BYTES].copy_from_slice(&digest);
        }
    }
    data.into_iter().map(Chunk::new).collect()
}

fn encode_layer(layout: &PcmtLayout, j: u32, data: &[Chunk]) -> Result<Vec<Chunk>> {
    let layer = layout.layer(j);
    let assignment = systematic_encode(&layer.graph, &layer.spec, data)?;
    let mut symbols = Vec::with_capacity(layer.symbol_count());
    for column in 1..=layer.columns() as u32 {
        for label in 1..=layer.n {
            let row = layer.spec.cmt_to_fg(label) as u32;
            symbols.push(assignment.get(VnId::new(column, row)).expect("complete encoding").clone());
        }
    }
    Ok(symbols)
}

impl PcmtTree {
    pub fn build(params: PcmtParams, block: &[u8]) -> Result<Self> {
        Self::build_with(PcmtLayout::new(params)?, block, None)
    }

    pub fn build_corrupted(params: PcmtParams, block: &[u8], corruption: Corruption) -> Result<Self> {
        Self::build_with(PcmtLayout::new(params)?, block, Some(corruption))
    }

    pub fn build_with(layout: PcmtLayout, block: &[u8], corruption: Option<Corruption>) -> Result<Self> {
        let params = *layout.params();
        let capacity = params.block_bytes() as usize;
        if block.len() > capacity {
            return Err(Error::BlockTooLarge { len: block.len(), capacity });
        }
        if let Some(c) = corruption {
            layout.check(Coords::new(c.layer, 1, c.row))?;
        }
        let mut padded = block.to_vec();
        padded.resize(capacity, 0);
        let mut data: Vec<Chunk> = padded.chunks(params.chunk_bytes as usize).map(Chunk::from).collect();

        let l = layout.n_layers();
        let mut layers = vec![Vec::new(); l as usize];
        for j in (1..=l).rev() {
            let mut symbols = encode_layer(&layout, j, &data)?;
            if let Some(c) = corruption.filter(|c| c.layer == j) {
                let top = layout.layer(j).top_column();
                let slot = &mut symbols[layout.symbol_index(Coords::new(j, top, c.row))];
                *slot = Chunk::new(slot.iter().map(|b| b ^ 0xff).collect());
            }
            if j > 1 {
                data = form_parent(&layout, j, &symbols);
            }
            layers[j as usize - 1] = symbols;
        }
        let root = layers[0].iter().map(|s| hash_symbol(s)).collect();
        Ok(Self { layout, layers, root, original_len: block.len() as u64 })
    }

    pub fn layout(&self) -> &PcmtLayout {
        &self.layout
    }

    pub fn params(&self) -> &PcmtParams {
        self.layout.params()
    }

    /// Root hashes ordered by column, then CMT row.
    pub fn root(&self) -> &[Digest] {
        &self.root
    }

    pub fn root_bytes(&self) -> Vec<u8> {
        self.root.concat()
    }

    pub fn original_len(&self) -> u64 {
        self.original_len
    }

    /// All symbols of layer `j` in (column, CMT row) order.
    pub fn layer_symbols(&self, j: u32) -> &[Chunk] {
        &self.layers[j as usize - 1]
    }

    pub fn layers(&self) -> &[Vec<Chunk>] {
        &self.layers
    }

    pub fn symbol(&self, c: Coords) -> Result<&Chunk> {
        self.layout.check(c)?;
        Ok(&self.layers[c.layer as usize - 1][self.layout.symbol_index(c)])
    }

    /// Data symbol plus parity symbol from every layer above `c`.
    pub fn merkle_proof(&self, c: Coords) -> Result<MerkleProof> {
        self.layout.check(c)?;
        let layers = (1..c.layer)
            .map(|j| {
                let top = self.layout.layer(j).top_column();
                let data_row = self.layout.proof_data_row(j, c.row);
                let parity_row = self.layout.proof_parity_row(j, c.row);
                ProofLayer {
                    data_row,
                    data: self.symbol(Coords::new(j, top, data_row)).unwrap().clone(),
                    parity_row,
                    parity: self.symbol(Coords::new(j, top, parity_row)).unwrap().clone(),
                }
            })
            .collect();
        Ok(MerkleProof { coords: c, layers })
    }

    /// Data-symbol-only path from `c` to the root.
    pub fn data_path(&self, c: Coords) -> Result<DataPath> {
        self.layout.check(c)?;
        DataPath::from_layers(&self.layout, &self.layers, c)
    }

    /// Binary container: header, params, then every layer's symbols.
    pub fn to_container(&self) -> Vec<u8> {
        let p = self.params();
        let mut out = Vec::new();
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_be_bytes());
        for v in [p.k, p.r_num, p.r_den, p.q, p.l, p.chunk_bytes, p.hash_bytes] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.original_len.to_be_bytes());
        for layer in &self.layers {
            for s in layer {
                out.extend_from_slice(s);
            }
        }
        out
    }

    pub fn from_container(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.bytes(4)? != CONTAINER_MAGIC {
            return Err(Error::Malformed("bad container magic".into()));
        }
        let version = r.u16()?;
        if version != CONTAINER_VERSION {
            return Err(Error::Malformed(format!("unsupported container version {version}")));
        }
        let mut f = [0u32; 7];
        for v in &mut f {
            *v = r.u32()?;
        }
        let params = PcmtParams { k: f[0], r_num: f[1], r_den: f[2], q: f[3], l: f[4], chunk_bytes: f[5], hash_bytes: f[6] };
        let original_len = r.u64()?;
        params.validate()?;
        let expected = payload_len(&params)?;
        if expected != Some(r.remaining()) {
            return Err(Error::Malformed(format!("container payload is {} bytes, params need {expected:?}", r.remaining())));
        }
        let layout = PcmtLayout::new(params)?;
        if original_len > params.block_bytes() {
            return Err(Error::Malformed("original length exceeds block capacity".into()));
        }
        let mut layers = Vec::with_capacity(layout.n_layers() as usize);
        for layer in layout.layers() {
            let symbols = (0..layer.symbol_count())
                .map(|_| r.bytes(layer.symbol_bytes).map(Chunk::from))
                .collect::<Result<Vec<_>>>()?;
            layers.push(symbols);
        }
        r.finish()?;
        let root = layers[0].iter().map(|s| hash_symbol(s)).collect();
        Ok(Self { layout, layers, root, original_len })
    }

    /// Rightmost-column symbols of layer `j` by CMT row, for decoders.
    pub fn coded_symbols(&self, j: u32) -> Vec<(u32, Chunk)> {
        let layer = self.layout.layer(j);
        let top = layer.top_column();
        (1..=layer.n as u32)
            .map(|row| (row, self.symbol(Coords::new(j, top, row)).unwrap().clone()))
            .collect()
    }

    /// Reassembles the original block from the base-layer data symbols.
    pub fn block(&self) -> Vec<u8> {
        let l = self.layout.n_layers();
        let top = self.layout.base().top_column();
        let mut out: Vec<u8> = (1..=self.layout.base().k as u32)
            .flat_map(|row| self.symbol(Coords::new(l, top, row)).unwrap().to_vec())
            .collect();
        out.truncate(self.original_len as usize);
        out
    }
}

/// Total symbol bytes of all layers, or `None` on overflow.
fn payload_len(params: &PcmtParams) -> Result<Option<usize>> {
    let sizes = derive_layer_sizes(params)?;
    let mut total = Some(0usize);
    for (j, &n) in sizes.iter().enumerate() {
        let symbol = match sizes.get(j + 1) {
            None => Some(params.chunk_bytes as usize),
            Some(&child) => (HASH_BYTES * params.q as usize).checked_mul(ceil_log2(child) + 1),
        };
        let layer = symbol.and_then(|s| s.checked_mul(n)).and_then(|b| b.checked_mul(ceil_log2(n) + 1));
        total = total.zip(layer).and_then(|(t, b)| t.checked_add(b));
    }
    Ok(total)
}

pub(crate) fn step_for(layout: &PcmtLayout, layers: &[Vec<Chunk>], layer: u32, row: u32) -> PathStep {
    let top = layout.layer(layer).top_column();
    let data_row = layout.proof_data_row(layer, row);
    PathStep { row: data_row, data: layers[layer as usize - 1][layout.symbol_index(Coords::new(layer, top, data_row))].clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_chunks() -> PcmtParams {
        PcmtParams::new(4, 1, 2, 4, 2, 16)
    }

    #[test]
    fn four_chunk_root_dimensions() {
        let block: Vec<u8> = (0..64u8).collect();
        let tree = PcmtTree::build(four_chunks(), &block).unwrap();
        assert_eq!(tree.root().len(), 12);
        assert_eq!(tree.layer_symbols(2).len(), 8 * 4);
        assert_eq!(tree.layer_symbols(1).len(), 4 * 3);
        assert_eq!(tree.block(), block);
    }

    #[test]
    fn large_tree_root_size() {
        let layout = PcmtLayout::new(PcmtParams::new(512, 1, 2, 4, 8, 1)).unwrap();
        assert_eq!(layout.root_len() * HASH_BYTES, 1024);
    }

    #[test]
    fn deterministic_and_container_round_trip() {
        let a = PcmtTree::build(four_chunks(), &[]).unwrap();
        let b = PcmtTree::build(four_chunks(), &[]).unwrap();
        assert_eq!(a.to_container(), b.to_container());
        let back = PcmtTree::from_container(&a.to_container()).unwrap();
        assert_eq!(back.root(), a.root());
        assert_eq!(back.to_container(), a.to_container());
        let mut bad = a.to_container();
        bad.pop();
        assert!(PcmtTree::from_container(&bad).is_err());
        bad[0] = b'X';
        assert!(PcmtTree::from_container(&bad).is_err());
    }

    #[test]
    fn huge_header_rejected_before_allocation() {
        let mut bytes = PcmtTree::build(four_chunks(), &[]).unwrap().to_container();
        bytes[6..10].copy_from_slice(&(1u32 << 30).to_be_bytes());
        assert!(matches!(PcmtTree::from_container(&bytes), Err(Error::Malformed(_))));
    }

    #[test]
    fn oversized_block_rejected() {
        assert!(matches!(PcmtTree::build(four_chunks(), &[0; 65]), Err(Error::BlockTooLarge { len: 65, capacity: 64 })));
    }

    #[test]
    fn parent_symbols_hold_child_hashes() {
        let block: Vec<u8> = (0..=255u8).cycle().take(64 * 16).collect();
        let tree = PcmtTree::build(PcmtParams::new(64, 1, 2, 4, 3, 16), &block).unwrap();
        let layout = tree.layout();
        for j in 2..=3 {
            let layer = layout.layer(j);
            assert_eq!(layout.layer(j - 1).symbol_bytes, HASH_BYTES * 4 * layer.columns());
            for column in 1..=layer.columns() as u32 {
                for row in 1..=layer.n as u32 {
                    let c = Coords::new(j, column, row);
                    let (prow, slot) = layout.parent_slot(c);
                    let parent = tree.symbol(Coords::new(j - 1, layout.layer(j - 1).top_column(), prow)).unwrap();
                    assert_eq!(&parent[slot * HASH_BYTES..(slot + 1) * HASH_BYTES], &hash_symbol(tree.symbol(c).unwrap()));
                }
            }
        }
    }

    #[test]
    fn frozen_tail_rows_are_zero() {
        let tree = PcmtTree::build(PcmtParams::new(64, 1, 2, 4, 3, 16), &[0xab; 900]).unwrap();
        let layout = tree.layout();
        for j in 1..=3 {
            let layer = layout.layer(j);
            for fg_row in layer.spec.eligible_rows() + 1..=layer.n {
                let label = layer.spec.fg_to_cmt(fg_row) as u32;
                for column in 1..=layer.columns() as u32 {
                    assert!(tree.symbol(Coords::new(j, column, label)).unwrap().is_zero());
                }
            }
        }
    }
}
