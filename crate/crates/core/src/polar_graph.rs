//! Polar encoding factor graphs.
//!
//! A graph for code length `N` has `⌈log N⌉ + 1` variable-node columns and
//! `⌈log N⌉` check-node columns. Rows and columns are 1-based. Check-node
//! column `k` splits the rows into blocks of `2h` with `h = 2^(n-k)`:
//!
//! ```text
//! top row i:      v[k+1][i]   = v[k][i] ^ v[k][i+h]   (XOR)
//! lower row i+h:  v[k+1][i+h] = v[k][i+h]             (EQUALITY)
//! ```
//!
//! Lengths that are not powers of two are obtained by dropping every row
//! below `N` from the ambient power-of-two graph. An XOR whose lower partner
//! disappears becomes an EQUALITY.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable node `v_{column,row}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VnId {
    pub column: u32,
    pub row: u32,
}

/// Check node `c_{column,row}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CnId {
    pub column: u32,
    pub row: u32,
}

impl VnId {
    pub fn new(column: u32, row: u32) -> Self {
        Self { column, row }
    }
}

impl CnId {
    pub fn new(column: u32, row: u32) -> Self {
        Self { column, row }
    }
}

impl fmt::Display for VnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{},{}", self.column, self.row)
    }
}

impl fmt::Display for CnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{},{}", self.column, self.row)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    Xor,
    Equality,
}

/// Up to three node indices stored inline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slots {
    items: [u32; 3],
    len: u8,
}

impl Slots {
    const EMPTY: Slots = Slots { items: [0; 3], len: 0 };

    fn push(&mut self, v: u32) {
        self.items[self.len as usize] = v;
        self.len += 1;
    }

    fn as_slice(&self) -> &[u32] {
        &self.items[..self.len as usize]
    }
}

/// One check node. All constraints are parity checks over their neighbors:
/// the XOR of the neighbor values is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Constraint {
    kind: ConstraintKind,
    neighbors: Slots,
}

impl Constraint {
    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    /// Neighbor VN indices. XOR: `[v(k,i), v(k,i+h), v(k+1,i)]`;
    /// EQUALITY: `[v(k,i), v(k+1,i)]`.
    pub fn neighbors(&self) -> &[u32] {
        self.neighbors.as_slice()
    }

    pub fn arity(&self) -> usize {
        self.neighbors.len as usize
    }
}

/// Immutable polar factor graph `G_N`.
#[derive(Clone, Debug)]
pub struct FactorGraph {
    n_rows: usize,
    n_stages: usize,
    ambient_rows: usize,
    constraints: Vec<Constraint>,
    vn_adjacency: Vec<Slots>,
}

/// `⌈log2 n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

impl FactorGraph {
    pub fn build(n_rows: usize) -> Result<Self> {
        if n_rows < 2 {
            return Err(Error::InvalidParameter(format!("code length {n_rows} < 2")));
        }
        if n_rows > u32::MAX as usize / 64 {
            return Err(Error::InvalidParameter(format!("code length {n_rows} too large")));
        }
        let n_stages = ceil_log2(n_rows);
        let ambient_rows = 1usize << n_stages;
        let vn = |col: usize, row: usize| ((col - 1) * n_rows + (row - 1)) as u32;

        let mut constraints = Vec::with_capacity(n_stages * n_rows);
        for k in 1..=n_stages {
            let h = 1usize << (n_stages - k);
            for i in 1..=n_rows {
                let mut neighbors = Slots::EMPTY;
                let is_top = (i - 1) % (2 * h) < h;
                let kind = if is_top && i + h <= n_rows {
                    neighbors.push(vn(k, i));
                    neighbors.push(vn(k, i + h));
                    neighbors.push(vn(k + 1, i));
                    ConstraintKind::Xor
                } else {
                    neighbors.push(vn(k, i));
                    neighbors.push(vn(k + 1, i));
                    ConstraintKind::Equality
                };
                constraints.push(Constraint { kind, neighbors });
            }
        }

        let mut vn_adjacency = vec![Slots::EMPTY; (n_stages + 1) * n_rows];
        for (c, constraint) in constraints.iter().enumerate() {
            for &v in constraint.neighbors() {
                vn_adjacency[v as usize].push(c as u32);
            }
        }

        Ok(Self { n_rows, n_stages, ambient_rows, constraints, vn_adjacency })
    }

    /// Code length `N`.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// `⌈log N⌉`, the number of check-node columns.
    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn n_vn_columns(&self) -> usize {
        self.n_stages + 1
    }

    /// The rightmost (coded-symbol) column.
    pub fn rightmost_column(&self) -> u32 {
        (self.n_stages + 1) as u32
    }

    pub fn ambient_rows(&self) -> usize {
        self.ambient_rows
    }

    pub fn is_trimmed(&self) -> bool {
        self.ambient_rows != self.n_rows
    }

    pub fn vn_count(&self) -> usize {
        self.n_vn_columns() * self.n_rows
    }

    pub fn cn_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn vn_index(&self, id: VnId) -> usize {
        debug_assert!(self.contains_vn(id));
        (id.column as usize - 1) * self.n_rows + (id.row as usize - 1)
    }

    pub fn vn_id(&self, index: usize) -> VnId {
        VnId::new((index / self.n_rows + 1) as u32, (index % self.n_rows + 1) as u32)
    }

    pub fn cn_index(&self, id: CnId) -> usize {
        debug_assert!(self.contains_cn(id));
        (id.column as usize - 1) * self.n_rows + (id.row as usize - 1)
    }

    pub fn cn_id(&self, index: usize) -> CnId {
        CnId::new((index / self.n_rows + 1) as u32, (index % self.n_rows + 1) as u32)
    }

    pub fn contains_vn(&self, id: VnId) -> bool {
        (1..=self.n_vn_columns() as u32).contains(&id.column)
            && (1..=self.n_rows as u32).contains(&id.row)
    }

    pub fn contains_cn(&self, id: CnId) -> bool {
        (1..=self.n_stages as u32).contains(&id.column) && (1..=self.n_rows as u32).contains(&id.row)
    }

    pub fn constraint(&self, index: usize) -> &Constraint {
        &self.constraints[index]
    }

    pub fn constraints(&self) -> impl Iterator<Item = (CnId, &Constraint)> + '_ {
        self.constraints.iter().enumerate().map(|(c, con)| (self.cn_id(c), con))
    }

    /// Check-node indices adjacent to a VN index.
    pub fn adjacent_cns(&self, vn: usize) -> &[u32] {
        self.vn_adjacency[vn].as_slice()
    }

    /// Neighbor VNs of a check node, in constraint order.
    pub fn cn_neighbors(&self, id: CnId) -> Vec<VnId> {
        self.constraints[self.cn_index(id)].neighbors().iter().map(|&v| self.vn_id(v as usize)).collect()
    }

    /// Column-(k+1) nodes a VN in column k spreads into: the right VN of every
    /// check node in column k that touches it.
    fn children(&self, vn: usize) -> impl Iterator<Item = usize> + '_ {
        let column = vn / self.n_rows + 1;
        self.adjacent_cns(vn).iter().filter_map(move |&c| {
            let c = c as usize;
            (c / self.n_rows + 1 == column).then(|| *self.constraints[c].neighbors().last().unwrap() as usize)
        })
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row == 0 || row > self.n_rows {
            return Err(Error::RowOutOfRange { row, max: self.n_rows });
        }
        Ok(())
    }

    /// Leaf-set sizes of all stopping trees, by counting leaves right to left.
    pub fn leaf_set_sizes(&self) -> LeafSizes {
        let n = self.n_rows;
        let mut counts = vec![1u64; n];
        for column in (1..=self.n_stages).rev() {
            let base = (column - 1) * n;
            counts = (0..n).map(|r| self.children(base + r).map(|child| counts[child % n]).sum()).collect();
        }
        LeafSizes { values: counts }
    }

    /// The stopping tree rooted at `v_{1,root_row}`.
    pub fn stopping_tree(&self, root_row: usize) -> Result<BTreeSet<VnId>> {
        self.check_row(root_row)?;
        let mut seen = vec![false; self.vn_count()];
        let mut stack = vec![root_row - 1];
        seen[root_row - 1] = true;
        while let Some(v) = stack.pop() {
            for child in self.children(v) {
                if !seen[child] {
                    seen[child] = true;
                    stack.push(child);
                }
            }
        }
        Ok(seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| self.vn_id(i)).collect())
    }

    /// Rightmost-column rows of the stopping tree rooted at `root_row`.
    pub fn leaf_set(&self, root_row: usize) -> Result<BTreeSet<usize>> {
        let right = self.rightmost_column();
        Ok(self
            .stopping_tree(root_row)?
            .into_iter()
            .filter(|v| v.column == right)
            .map(|v| v.row as usize)
            .collect())
    }

    /// True iff every check node adjacent to `vns` has at least two
    /// neighbors inside `vns`.
    pub fn is_stopping_set(&self, vns: &BTreeSet<VnId>) -> bool {
        let mut members = vec![false; self.vn_count()];
        for &v in vns {
            if !self.contains_vn(v) {
                return false;
            }
            members[self.vn_index(v)] = true;
        }
        vns.iter().all(|&v| {
            self.adjacent_cns(self.vn_index(v)).iter().all(|&c| {
                self.constraints[c as usize].neighbors().iter().filter(|&&u| members[u as usize]).count() >= 2
            })
        })
    }

    /// Every nonempty stopping set, by exhaustive search over VN subsets.
    pub fn enumerate_stopping_sets(&self, max_vns: usize) -> Result<impl Iterator<Item = BTreeSet<VnId>> + '_> {
        let total = self.vn_count();
        let limit = max_vns.min(63);
        if total > limit {
            return Err(Error::GraphTooLarge { size: total, limit });
        }
        let cn_masks: Vec<u64> = self
            .constraints
            .iter()
            .map(|c| c.neighbors().iter().fold(0u64, |m, &v| m | (1 << v)))
            .collect();
        Ok((1u64..(1u64 << total)).filter_map(move |mask| {
            let stops = cn_masks.iter().all(|&m| (mask & m).count_ones() != 1);
            stops.then(|| (0..total).filter(|&i| mask & (1 << i) != 0).map(|i| self.vn_id(i)).collect())
        }))
    }

    /// Graphviz rendering with nodes labelled `v{k},{i}` / `c{k},{i}`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph polar {\n  rankdir=LR;\n");
        for i in 0..self.vn_count() {
            let v = self.vn_id(i);
            let _ = writeln!(out, "  \"{v}\" [shape=circle];");
        }
        for (id, c) in self.constraints() {
            let shape = match c.kind() {
                ConstraintKind::Xor => "box",
                ConstraintKind::Equality => "square",
            };
            let _ = writeln!(out, "  \"{id}\" [shape={shape}];");
            for &v in c.neighbors() {
                let _ = writeln!(out, "  \"{id}\" -- \"{}\";", self.vn_id(v as usize));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Stopping-tree leaf-set sizes `T_N`, indexed by row (1-based accessors).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafSizes {
    values: Vec<u64>,
}

impl LeafSizes {
    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// `T_N(row)`.
    pub fn get(&self, row: usize) -> u64 {
        self.values[row - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `min(T; m)`: the m-th smallest value, 1-based.
    pub fn kth_smallest(&self, m: usize) -> u64 {
        let mut sorted = self.values.clone();
        sorted.sort_unstable();
        sorted[m - 1]
    }
}

pub fn build_factor_graph(n: usize) -> Result<FactorGraph> {
    FactorGraph::build(n)
}
