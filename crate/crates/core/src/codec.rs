//! Erasure peeling over polar factor graphs.
//!
//! The same peeling engine drives systematic encoding (data on the right,
//! frozen zeros on the left) and decoding (surviving coded symbols on the
//! right). Every check node is a parity check over its neighbors, so a node
//! with exactly one unknown neighbor determines it by XOR.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::freezing::CodeSpec;
use crate::polar_graph::{FactorGraph, VnId};

/// Fixed-length symbol. XOR is bytewise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Chunk(Vec<u8>);

impl Chunk {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn zero(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn xor_assign(&mut self, other: &Chunk) {
        debug_assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl Deref for Chunk {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<Vec<u8>> for Chunk {
    fn from(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }
}

impl From<&[u8]> for Chunk {
    fn from(bytes: &[u8]) -> Self {
        Self(bytes.to_vec())
    }
}

/// Possibly partial map from VNs to chunks of one shared length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    n_rows: usize,
    n_columns: usize,
    chunk_len: usize,
    values: Vec<Option<Chunk>>,
}

impl Assignment {
    pub fn empty(graph: &FactorGraph, chunk_len: usize) -> Self {
        Self { n_rows: graph.n_rows(), n_columns: graph.n_vn_columns(), chunk_len, values: vec![None; graph.vn_count()] }
    }

    fn index(&self, id: VnId) -> usize {
        assert!(
            (1..=self.n_columns as u32).contains(&id.column) && (1..=self.n_rows as u32).contains(&id.row),
            "{id} outside a {}x{} assignment",
            self.n_columns,
            self.n_rows
        );
        (id.column as usize - 1) * self.n_rows + id.row as usize - 1
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk_len
    }

    pub fn get(&self, id: VnId) -> Option<&Chunk> {
        self.values[self.index(id)].as_ref()
    }

    /// Panics if the chunk length differs from the assignment's.
    pub fn set(&mut self, id: VnId, chunk: Chunk) {
        assert_eq!(chunk.len(), self.chunk_len, "chunk length mismatch");
        let i = self.index(id);
        self.values[i] = Some(chunk);
    }

    pub fn clear(&mut self, id: VnId) {
        let i = self.index(id);
        self.values[i] = None;
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn known_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Column `column`, rows 1..=N. Panics on unknown entries.
    pub fn column(&self, column: u32) -> Vec<Chunk> {
        (1..=self.n_rows as u32).map(|r| self.get(VnId::new(column, r)).expect("complete column").clone()).collect()
    }

    pub(crate) fn raw(&self) -> &[Option<Chunk>] {
        &self.values
    }
}

/// Unresolved VNs left when peeling stops; they contain a stopping set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StuckReport {
    pub unresolved: Vec<VnId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Complete { assignment: Assignment, cn_resolutions: usize },
    Stuck(StuckReport),
}

/// How a peeling run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum PeelEnd {
    Complete,
    Stuck(Vec<usize>),
    /// A fully known check node whose parity fails.
    Inconsistent(usize),
    /// The acceptance hook refused the value just solved for `vn` by `cn`.
    Rejected { vn: usize, cn: usize },
}

/// Runs the peeling decoder in place. Check nodes are visited in
/// (column, row) order and re-queued whenever a neighbor resolves; `accept`
/// sees every newly solved value and may abort the run.
pub(crate) fn peel(
    graph: &FactorGraph,
    values: &mut [Option<Chunk>],
    chunk_len: usize,
    mut accept: impl FnMut(usize, &Chunk) -> bool,
) -> (PeelEnd, usize) {
    let cn_count = graph.cn_count();
    let mut queue: VecDeque<usize> = (0..cn_count).collect();
    let mut queued = vec![true; cn_count];
    let mut resolutions = 0;

    while let Some(c) = queue.pop_front() {
        queued[c] = false;
        let neighbors = graph.constraint(c).neighbors();
        let mut unknown = None;
        let mut unknown_count = 0;
        let mut sum = Chunk::zero(chunk_len);
        for &v in neighbors {
            match &values[v as usize] {
                Some(chunk) => sum.xor_assign(chunk),
                None => {
                    unknown_count += 1;
                    unknown = Some(v as usize);
                }
            }
        }
        match (unknown_count, unknown) {
            (0, _) if !sum.is_zero() => return (PeelEnd::Inconsistent(c), resolutions),
            (1, Some(v)) => {
                resolutions += 1;
                let ok = accept(v, &sum);
                values[v] = Some(sum);
                if !ok {
                    return (PeelEnd::Rejected { vn: v, cn: c }, resolutions);
                }
                for &other in graph.adjacent_cns(v) {
                    let other = other as usize;
                    if other != c && !queued[other] {
                        queued[other] = true;
                        queue.push_back(other);
                    }
                }
            }
            _ => {}
        }
    }

    let unresolved: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_none()).collect();
    if unresolved.is_empty() {
        (PeelEnd::Complete, resolutions)
    } else {
        (PeelEnd::Stuck(unresolved), resolutions)
    }
}

/// Peeling encoder: data on the information rows of the rightmost column,
/// zeros on the frozen rows of column 1, everything else peeled.
pub fn systematic_encode(graph: &FactorGraph, spec: &CodeSpec, data: &[Chunk]) -> Result<Assignment> {
    if spec.n() != graph.n_rows() {
        return Err(Error::InvalidParameter(format!("spec length {} != graph length {}", spec.n(), graph.n_rows())));
    }
    if data.len() != spec.k() {
        return Err(Error::InvalidParameter(format!("expected {} data chunks, got {}", spec.k(), data.len())));
    }
    let chunk_len = data.first().map_or(0, |c| c.len());
    if data.iter().any(|c| c.len() != chunk_len) {
        return Err(Error::InvalidParameter("data chunks differ in length".into()));
    }
    let mut assignment = Assignment::empty(graph, chunk_len);
    let right = graph.rightmost_column();
    for (&row, chunk) in spec.info().iter().zip(data) {
        assignment.set(VnId::new(right, row as u32), chunk.clone());
    }
    for &row in spec.frozen() {
        assignment.set(VnId::new(1, row as u32), Chunk::zero(chunk_len));
    }
    let (end, _) = peel(graph, &mut assignment.values, chunk_len, |_, _| true);
    match end {
        PeelEnd::Complete => Ok(assignment),
        PeelEnd::Stuck(left) => Err(Error::EncoderStalled(left.len())),
        PeelEnd::Inconsistent(c) => Err(Error::Inconsistent(graph.cn_id(c))),
        PeelEnd::Rejected { .. } => unreachable!("encoder accepts every value"),
    }
}

/// Decodes from known rightmost symbols. Frozen column-1 zeros and every VN
/// in the trailing `mu2` frozen rows are injected as known zeros.
pub fn peel_decode(graph: &FactorGraph, spec: &CodeSpec, known: &Assignment) -> Result<DecodeOutcome> {
    if spec.n() != graph.n_rows() || known.n_rows != graph.n_rows() || known.n_columns != graph.n_vn_columns() {
        return Err(Error::InvalidParameter("assignment, spec and graph disagree on dimensions".into()));
    }
    let chunk_len = known.chunk_len;
    let mut values = known.values.clone();
    for &row in spec.frozen() {
        let i = graph.vn_index(VnId::new(1, row as u32));
        values[i].get_or_insert_with(|| Chunk::zero(chunk_len));
    }
    let n = graph.n_rows();
    for row in spec.eligible_rows() + 1..=n {
        for column in 1..=graph.rightmost_column() {
            let i = graph.vn_index(VnId::new(column, row as u32));
            values[i].get_or_insert_with(|| Chunk::zero(chunk_len));
        }
    }
    let (end, cn_resolutions) = peel(graph, &mut values, chunk_len, |_, _| true);
    match end {
        PeelEnd::Complete => Ok(DecodeOutcome::Complete {
            assignment: Assignment { values, ..known.clone() },
            cn_resolutions,
        }),
        PeelEnd::Stuck(left) => {
            Ok(DecodeOutcome::Stuck(StuckReport { unresolved: left.into_iter().map(|i| graph.vn_id(i)).collect() }))
        }
        PeelEnd::Inconsistent(c) => Err(Error::Inconsistent(graph.cn_id(c))),
        PeelEnd::Rejected { .. } => unreachable!("decoder accepts every value"),
    }
}

/// Peels with only the given knowns plus column-1 frozen zeros; nothing is
/// assumed about the trailing frozen rows.
pub fn peel_decode_minimal(graph: &FactorGraph, spec: &CodeSpec, known: &Assignment) -> Result<DecodeOutcome> {
    let chunk_len = known.chunk_len;
    let mut values = known.values.clone();
    for &row in spec.frozen() {
        values[graph.vn_index(VnId::new(1, row as u32))].get_or_insert_with(|| Chunk::zero(chunk_len));
    }
    let (end, cn_resolutions) = peel(graph, &mut values, chunk_len, |_, _| true);
    match end {
        PeelEnd::Complete => {
            Ok(DecodeOutcome::Complete { assignment: Assignment { values, ..known.clone() }, cn_resolutions })
        }
        PeelEnd::Stuck(left) => {
            Ok(DecodeOutcome::Stuck(StuckReport { unresolved: left.into_iter().map(|i| graph.vn_id(i)).collect() }))
        }
        PeelEnd::Inconsistent(c) => Err(Error::Inconsistent(graph.cn_id(c))),
        PeelEnd::Rejected { .. } => unreachable!(),
    }
}

/// True iff the assignment is complete and every check node holds.
pub fn check_constraints(graph: &FactorGraph, assignment: &Assignment) -> bool {
    let values = assignment.raw();
    graph.constraints().all(|(_, c)| {
        let mut sum = Chunk::zero(assignment.chunk_len);
        for &v in c.neighbors() {
            match &values[v as usize] {
                Some(chunk) => sum.xor_assign(chunk),
                None => return false,
            }
        }
        sum.is_zero()
    })
}

/// Largest eligible-row count [`min_hiding_oracle`] will search.
pub const ORACLE_ELIGIBLE_LIMIT: usize = 20;

/// Does hiding these rightmost rows (FG rows) stall the decoder?
pub fn hiding_blocks_decode(graph: &FactorGraph, spec: &CodeSpec, hidden: &BTreeSet<usize>) -> bool {
    let mut known = Assignment::empty(graph, 0);
    let right = graph.rightmost_column();
    for row in 1..=spec.eligible_rows() {
        if !hidden.contains(&row) {
            known.set(VnId::new(right, row as u32), Chunk::zero(0));
        }
    }
    matches!(peel_decode(graph, spec, &known), Ok(DecodeOutcome::Stuck(_)))
}

/// Minimum number of eligible rightmost symbols whose erasure stalls the
/// decoder, by exhaustive search in order of increasing weight.
pub fn min_hiding_oracle(graph: &FactorGraph, spec: &CodeSpec) -> Result<usize> {
    let eligible = spec.eligible_rows();
    if eligible > ORACLE_ELIGIBLE_LIMIT {
        return Err(Error::GraphTooLarge { size: eligible, limit: ORACLE_ELIGIBLE_LIMIT });
    }
    for weight in 1..=eligible {
        // Gosper's hack over `eligible`-bit masks of popcount `weight`.
        let mut mask: u32 = (1 << weight) - 1;
        while mask < (1 << eligible) {
            let hidden: BTreeSet<usize> = (0..eligible).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
            if hiding_blocks_decode(graph, spec, &hidden) {
                return Ok(weight);
            }
            let low = mask & mask.wrapping_neg();
            let ripple = mask + low;
            mask = (((ripple ^ mask) >> 2) / low) | ripple;
        }
    }
    Ok(eligible)
}
