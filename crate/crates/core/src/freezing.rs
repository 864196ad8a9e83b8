//! Frozen-set construction and the resulting detection guarantees.
//!
//! [`sef_freeze`] freezes every row whose stopping tree is smaller than the
//! `(N-K)`-th smallest leaf-set size, then fills the remaining frozen slots
//! from the bottom row upward. Rows in the trailing frozen run (`mu2` of
//! them) carry provable zeros and are never sampled, which raises the
//! effective undecodable threshold to `minT * N / (N - mu2)`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar_graph::{FactorGraph, LeafSizes};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreezeAlgorithm {
    Sef,
    Nrm,
}

/// Frozen/information split of one layer's code, plus the row relabelling
/// between CMT symbol order and factor-graph rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeSpec {
    n: usize,
    k: usize,
    algorithm: FreezeAlgorithm,
    frozen: Vec<usize>,
    info: Vec<usize>,
    is_frozen: Vec<bool>,
    leaf_sizes: LeafSizes,
    mu2: usize,
    /// `cmt_perm[label - 1]` is the FG row of CMT label `label`.
    cmt_perm: Vec<usize>,
    fg_to_cmt: Vec<usize>,
}

impl CodeSpec {
    /// Assembles a spec from an explicit frozen set.
    pub fn from_frozen(
        n: usize,
        algorithm: FreezeAlgorithm,
        frozen_rows: impl IntoIterator<Item = usize>,
        leaf_sizes: LeafSizes,
    ) -> Result<Self> {
        if leaf_sizes.len() != n {
            return Err(Error::InvalidParameter(format!(
                "leaf sizes cover {} rows, code has {n}",
                leaf_sizes.len()
            )));
        }
        let mut is_frozen = vec![false; n];
        for row in frozen_rows {
            if row == 0 || row > n {
                return Err(Error::RowOutOfRange { row, max: n });
            }
            is_frozen[row - 1] = true;
        }
        let frozen: Vec<usize> = (1..=n).filter(|&r| is_frozen[r - 1]).collect();
        let info: Vec<usize> = (1..=n).filter(|&r| !is_frozen[r - 1]).collect();
        if info.is_empty() || frozen.is_empty() {
            return Err(Error::InvalidParameter(format!("need 1 <= K < N, got K = {}", info.len())));
        }
        let mu2 = is_frozen.iter().rev().take_while(|&&f| f).count();
        let cmt_perm: Vec<usize> = info.iter().chain(frozen.iter()).copied().collect();
        let mut fg_to_cmt = vec![0; n];
        for (label, &row) in cmt_perm.iter().enumerate() {
            fg_to_cmt[row - 1] = label + 1;
        }
        Ok(Self { n, k: info.len(), algorithm, frozen, info, is_frozen, leaf_sizes, mu2, cmt_perm, fg_to_cmt })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn algorithm(&self) -> FreezeAlgorithm {
        self.algorithm
    }

    /// Frozen FG rows, ascending.
    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    /// Information FG rows, ascending.
    pub fn info(&self) -> &[usize] {
        &self.info
    }

    pub fn is_frozen(&self, row: usize) -> bool {
        self.is_frozen[row - 1]
    }

    pub fn leaf_sizes(&self) -> &LeafSizes {
        &self.leaf_sizes
    }

    /// Length of the trailing run of frozen rows.
    pub fn mu2(&self) -> usize {
        self.mu2
    }

    /// Number of rightmost symbols a light node samples from (`N - mu2`).
    pub fn eligible_rows(&self) -> usize {
        self.n - self.mu2
    }

    /// FG row of a CMT label.
    pub fn cmt_to_fg(&self, label: usize) -> usize {
        self.cmt_perm[label - 1]
    }

    /// CMT label of an FG row.
    pub fn fg_to_cmt(&self, row: usize) -> usize {
        self.fg_to_cmt[row - 1]
    }

    pub fn cmt_perm(&self) -> &[usize] {
        &self.cmt_perm
    }

    /// `min_{i in A} T_N(i)`.
    pub fn min_info_leaf(&self) -> u64 {
        self.info.iter().map(|&r| self.leaf_sizes.get(r)).min().expect("K >= 1")
    }

    /// Lowest information row attaining [`Self::min_info_leaf`].
    pub fn argmin_info_leaf(&self) -> usize {
        let min = self.min_info_leaf();
        *self.info.iter().find(|&&r| self.leaf_sizes.get(r) == min).expect("K >= 1")
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n < 2 || k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("need 2 <= N and 1 <= K < N, got ({n}, {k})")));
    }
    Ok(())
}

/// Sampling-efficient freezing on an existing graph for `N = graph.n_rows()`.
pub fn sef_freeze_on(graph: &FactorGraph, k: usize) -> Result<CodeSpec> {
    let n = graph.n_rows();
    check_nk(n, k)?;
    let leaf_sizes = graph.leaf_set_sizes();
    let target = n - k;
    let threshold = leaf_sizes.kth_smallest(target);
    let mut frozen = vec![false; n];
    let mut count = 0;
    for row in 1..=n {
        if leaf_sizes.get(row) < threshold {
            frozen[row - 1] = true;
            count += 1;
        }
    }
    let mut row = n;
    while count < target {
        if !frozen[row - 1] {
            frozen[row - 1] = true;
            count += 1;
        }
        row -= 1;
    }
    CodeSpec::from_frozen(n, FreezeAlgorithm::Sef, (1..=n).filter(|&r| frozen[r - 1]), leaf_sizes)
}

pub fn sef_freeze(n: usize, k: usize) -> Result<CodeSpec> {
    check_nk(n, k)?;
    sef_freeze_on(&FactorGraph::build(n)?, k)
}

/// Naive Reed-Muller freezing: the `N-K` rows with the smallest stopping
/// trees, ties to the lowest row. Defined for power-of-two lengths only.
pub fn nrm_freeze_on(graph: &FactorGraph, k: usize) -> Result<CodeSpec> {
    let n = graph.n_rows();
    check_nk(n, k)?;
    if !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("NRM needs a power-of-two length, got {n}")));
    }
    let leaf_sizes = graph.leaf_set_sizes();
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by_key(|&r| (leaf_sizes.get(r), r));
    order.truncate(n - k);
    CodeSpec::from_frozen(n, FreezeAlgorithm::Nrm, order, leaf_sizes)
}

pub fn nrm_freeze(n: usize, k: usize) -> Result<CodeSpec> {
    check_nk(n, k)?;
    nrm_freeze_on(&FactorGraph::build(n)?, k)
}

pub fn freeze(n: usize, k: usize, algorithm: FreezeAlgorithm) -> Result<CodeSpec> {
    match algorithm {
        FreezeAlgorithm::Sef => sef_freeze(n, k),
        FreezeAlgorithm::Nrm => nrm_freeze(n, k),
    }
}

/// Effective undecodable threshold `minT * N / (N - mu2)`, exact.
pub fn undecodable_threshold(spec: &CodeSpec) -> Ratio<u64> {
    Ratio::new(spec.min_info_leaf() * spec.n() as u64, spec.eligible_rows() as u64)
}

/// Closed-form NRM threshold `min(T_N; N-K)`, used as the comparison
/// baseline for SEF.
pub fn nrm_closed_form_threshold(leaf_sizes: &LeafSizes, n: usize, k: usize) -> u64 {
    leaf_sizes.kth_smallest(n - k)
}

/// Probability that one hidden fraction `p` evades `s` independent samples.
fn miss_probability(p: f64, s: u64) -> f64 {
    let keep = (1.0 - p).max(0.0);
    if s <= i32::MAX as u64 {
        keep.powi(s as i32)
    } else {
        keep.powf(s as f64)
    }
}

/// `(1 - alpha / N)^s` with `alpha / N = minT / (N - mu2)`.
pub fn prob_failure(spec: &CodeSpec, s: u64) -> f64 {
    let p = spec.min_info_leaf() as f64 / spec.eligible_rows() as f64;
    miss_probability(p, s)
}

/// Detection failure for an arbitrary threshold ratio `alpha / N`.
pub fn prob_failure_ratio(alpha_over_n: Ratio<u64>, s: u64) -> f64 {
    miss_probability(*alpha_over_n.numer() as f64 / *alpha_over_n.denom() as f64, s)
}

/// Smallest `s` with `(1 - p)^s <= target`.
pub fn samples_for_ratio(alpha_over_n: Ratio<u64>, target_pf: f64) -> Result<u64> {
    if !(target_pf > 0.0 && target_pf < 1.0) {
        return Err(Error::InvalidParameter(format!("target probability {target_pf} not in (0, 1)")));
    }
    if *alpha_over_n.numer() == 0 {
        return Err(Error::NoFiniteAnswer);
    }
    if alpha_over_n >= Ratio::from_integer(1) {
        return Ok(1);
    }
    let estimate = (target_pf.ln() / (1.0 - ratio_f64(alpha_over_n)).ln()).ceil().max(1.0) as u64;
    // Float rounding can put the estimate one off in either direction.
    let mut s = estimate.saturating_sub(1).max(1);
    while prob_failure_ratio(alpha_over_n, s) > target_pf {
        s += 1;
    }
    Ok(s)
}

pub fn samples_needed(spec: &CodeSpec, target_pf: f64) -> Result<u64> {
    samples_for_ratio(Ratio::new(spec.min_info_leaf(), spec.eligible_rows() as u64), target_pf)
}

pub(crate) fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
