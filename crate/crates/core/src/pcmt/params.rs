use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freezing::{sef_freeze_on, CodeSpec};
use crate::hash::HASH_BYTES;
use crate::polar_graph::{ceil_log2, FactorGraph};

fn default_hash_bytes() -> u32 {
    HASH_BYTES as u32
}

/// Tree parameters `(k, R, q, l)` plus symbol sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcmtParams {
    /// Data symbols in the base layer.
    pub k: u32,
    pub r_num: u32,
    pub r_den: u32,
    /// Hash aggregation arity.
    pub q: u32,
    /// Number of coded layers.
    pub l: u32,
    /// Base-layer symbol size `c`.
    pub chunk_bytes: u32,
    #[serde(default = "default_hash_bytes")]
    pub hash_bytes: u32,
}

impl PcmtParams {
    pub fn new(k: u32, r_num: u32, r_den: u32, q: u32, l: u32, chunk_bytes: u32) -> Self {
        Self { k, r_num, r_den, q, l, chunk_bytes, hash_bytes: HASH_BYTES as u32 }
    }

    pub fn rate(&self) -> Ratio<u64> {
        Ratio::new(self.r_num as u64, self.r_den as u64)
    }

    /// Block capacity `b = k * c`.
    pub fn block_bytes(&self) -> u64 {
        self.k as u64 * self.chunk_bytes as u64
    }

    /// Layer sizes `[N_1, ..., N_l]` with `N_l = k / R` and
    /// `N_{j-1} = N_j / (qR)`.
    pub fn layer_sizes(&self) -> Result<Vec<usize>> {
        derive_layer_sizes(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.r_den == 0 || self.r_num == 0 || self.r_num >= self.r_den {
            return bad(format!("rate {}/{} not in (0, 1)", self.r_num, self.r_den));
        }
        if self.q < 2 || self.l < 1 || self.k < 1 || self.chunk_bytes < 1 {
            return bad("need q >= 2, l >= 1, k >= 1, chunk_bytes >= 1".into());
        }
        if self.hash_bytes as usize != HASH_BYTES {
            return bad(format!("hash_bytes must be {HASH_BYTES} (SHA-256)"));
        }
        let qr = self.rate() * Ratio::from_integer(self.q as u64);
        if !qr.is_integer() {
            return bad(format!("qR = {qr} must be an integer"));
        }
        derive_layer_sizes(self).map(|_| ())
    }
}

pub fn derive_layer_sizes(params: &PcmtParams) -> Result<Vec<usize>> {
    if params.r_den == 0 || params.r_num == 0 || params.r_num >= params.r_den || params.q == 0 || params.l == 0 {
        return Err(Error::InvalidParameter("rate must be in (0,1), q >= 1, l >= 1".into()));
    }
    let rate = params.rate();
    let shrink = rate * Ratio::from_integer(params.q as u64);
    let mut sizes = vec![Ratio::from_integer(0); params.l as usize];
    sizes[params.l as usize - 1] = Ratio::from_integer(params.k as u64) / rate;
    for j in (0..params.l as usize - 1).rev() {
        sizes[j] = sizes[j + 1] / shrink;
    }
    let mut out = Vec::with_capacity(sizes.len());
    for (j, size) in sizes.iter().enumerate() {
        let layer = j as u32 + 1;
        if !size.is_integer() {
            return Err(Error::NonIntegerLayer { layer, detail: format!("N_{layer} = {size}") });
        }
        if !(*size * rate).is_integer() {
            return Err(Error::NonIntegerLayer { layer, detail: format!("R * N_{layer} = {}", *size * rate) });
        }
        out.push(size.to_integer() as usize);
    }
    if out[0] < 2 {
        return Err(Error::InvalidParameter(format!("N_1 = {} < 2", out[0])));
    }
    Ok(out)
}

/// Coordinates `(layer j, column k, CMT row i)` of an intermediate symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coords {
    pub layer: u32,
    pub column: u32,
    pub row: u32,
}

impl Coords {
    pub fn new(layer: u32, column: u32, row: u32) -> Self {
        Self { layer, column, row }
    }
}

impl std::fmt::Display for Coords {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C{}[{}][{}]", self.layer, self.column, self.row)
    }
}

/// Per-layer code and sizes.
#[derive(Clone, Debug)]
pub struct LayerLayout {
    pub n: usize,
    /// Data symbols `R * N_j`.
    pub k: usize,
    pub graph: FactorGraph,
    pub spec: CodeSpec,
    pub symbol_bytes: usize,
}

impl LayerLayout {
    /// `⌈log N_j⌉ + 1`.
    pub fn columns(&self) -> usize {
        self.graph.n_vn_columns()
    }

    pub fn top_column(&self) -> u32 {
        self.graph.rightmost_column()
    }

    pub fn symbol_count(&self) -> usize {
        self.n * self.columns()
    }
}

/// Everything derivable from the parameters: layer sizes, graphs and SEF
/// specs, symbol sizes, and the hash slot arithmetic.
#[derive(Clone, Debug)]
pub struct PcmtLayout {
    params: PcmtParams,
    layers: Vec<LayerLayout>,
}

impl PcmtLayout {
    pub fn new(params: PcmtParams) -> Result<Self> {
        params.validate()?;
        let sizes = derive_layer_sizes(&params)?;
        let rate = params.rate();
        let mut layers = Vec::with_capacity(sizes.len());
        for (j, &n) in sizes.iter().enumerate() {
            let graph = FactorGraph::build(n)?;
            let k = (Ratio::from_integer(n as u64) * rate).to_integer() as usize;
            let spec = sef_freeze_on(&graph, k)?;
            let symbol_bytes = match sizes.get(j + 1) {
                None => params.chunk_bytes as usize,
                Some(&child) => HASH_BYTES * params.q as usize * (ceil_log2(child) + 1),
            };
            layers.push(LayerLayout { n, k, graph, spec, symbol_bytes });
        }
        Ok(Self { params, layers })
    }

    pub fn params(&self) -> &PcmtParams {
        &self.params
    }

    pub fn n_layers(&self) -> u32 {
        self.layers.len() as u32
    }

    /// Layer `j`, 1-based.
    pub fn layer(&self, j: u32) -> &LayerLayout {
        &self.layers[j as usize - 1]
    }

    pub fn base(&self) -> &LayerLayout {
        self.layers.last().expect("l >= 1")
    }

    pub fn layers(&self) -> &[LayerLayout] {
        &self.layers
    }

    /// Hashes in the root list: `N_1 (⌈log N_1⌉ + 1)`.
    pub fn root_len(&self) -> usize {
        self.layers[0].symbol_count()
    }

    pub fn contains(&self, c: Coords) -> bool {
        if c.layer == 0 || c.layer > self.n_layers() {
            return false;
        }
        let layer = self.layer(c.layer);
        (1..=layer.columns() as u32).contains(&c.column) && (1..=layer.n as u32).contains(&c.row)
    }

    pub fn check(&self, c: Coords) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::CoordsOutOfRange(c.to_string()))
        }
    }

    /// Position of a symbol in its layer's (column, row) ordered list.
    pub fn symbol_index(&self, c: Coords) -> usize {
        (c.column as usize - 1) * self.layer(c.layer).n + c.row as usize - 1
    }

    /// Slot of `C_1[column][row]` in the root list.
    pub fn root_slot(&self, column: u32, row: u32) -> usize {
        (column as usize - 1) * self.layers[0].n + row as usize - 1
    }

    /// For a symbol in layer `j >= 2`: the parent data row in layer `j-1`
    /// and the hash slot inside that data symbol.
    pub fn parent_slot(&self, c: Coords) -> (u32, usize) {
        debug_assert!(c.layer >= 2);
        let parent_data = self.layer(c.layer - 1).k;
        let x = c.row as usize - 1;
        let row = 1 + x % parent_data;
        let t = x / parent_data;
        (row as u32, (c.column as usize - 1) * self.params.q as usize + t)
    }

    /// Data row of layer `j'` on the path of CMT row `i`.
    pub fn proof_data_row(&self, layer: u32, i: u32) -> u32 {
        let l = self.layer(layer);
        (1 + (i as usize - 1) % l.k) as u32
    }

    /// Parity row of layer `j'` sampled alongside CMT row `i`.
    pub fn proof_parity_row(&self, layer: u32, i: u32) -> u32 {
        let l = self.layer(layer);
        (1 + l.k + (i as usize - 1) % (l.n - l.k)) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_chunk_sizes() {
        assert_eq!(PcmtParams::new(4, 1, 2, 4, 2, 8).layer_sizes().unwrap(), vec![4, 8]);
    }

    #[test]
    fn large_tree_sizes() {
        let sizes = PcmtParams::new(512, 1, 2, 4, 8, 256_000).layer_sizes().unwrap();
        assert_eq!(sizes.first(), Some(&8));
        assert_eq!(sizes.last(), Some(&1024));
        let sizes = PcmtParams::new(4096, 1, 2, 4, 10, 256_000).layer_sizes().unwrap();
        assert_eq!((sizes[0], sizes[9]), (16, 8192));
    }

    #[test]
    fn non_integer_layer_rejected() {
        let err = PcmtParams::new(3, 1, 2, 4, 2, 8).layer_sizes().unwrap_err();
        assert!(matches!(err, Error::NonIntegerLayer { layer: 1, .. }), "{err:?}");
    }

    #[test]
    fn validation() {
        assert!(PcmtParams::new(64, 1, 2, 4, 3, 1024).validate().is_ok());
        assert!(PcmtParams::new(64, 2, 2, 4, 3, 1024).validate().is_err());
        let mut p = PcmtParams::new(64, 1, 2, 4, 3, 1024);
        p.hash_bytes = 20;
        assert!(p.validate().is_err());
        // qR = 5/3 is not an integer
        assert!(PcmtParams::new(40, 1, 3, 5, 1, 8).validate().is_err());
        assert!(PcmtParams::new(40, 2, 5, 5, 2, 8).validate().is_ok());
    }

    #[test]
    fn proof_rows_match_modular_formula() {
        let layout = PcmtLayout::new(PcmtParams::new(4, 1, 2, 4, 2, 8)).unwrap();
        assert_eq!(layout.proof_data_row(1, 5), 1);
        assert_eq!(layout.proof_parity_row(1, 5), 3);
        assert_eq!(layout.layer(1).symbol_bytes, 32 * 4 * 4);
        assert_eq!(layout.root_len(), 12);
    }

    #[test]
    fn parent_slots_partition_the_parent_layer() {
        let layout = PcmtLayout::new(PcmtParams::new(64, 1, 2, 4, 3, 16)).unwrap();
        for j in 2..=3 {
            let layer = layout.layer(j);
            let parent = layout.layer(j - 1);
            let mut seen = std::collections::HashSet::new();
            for column in 1..=layer.columns() as u32 {
                for row in 1..=layer.n as u32 {
                    let (prow, slot) = layout.parent_slot(Coords::new(j, column, row));
                    assert!(prow as usize <= parent.k);
                    assert!((slot + 1) * HASH_BYTES <= parent.symbol_bytes);
                    assert!(seen.insert((prow, slot)));
                }
            }
            assert_eq!(seen.len(), parent.k * parent.symbol_bytes / HASH_BYTES);
        }
    }
}
