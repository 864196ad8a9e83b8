//! Data-availability attacks on the base layer and light-node sampling.
//!
//! Each trial draws `s` positions uniformly with replacement from the
//! eligible rightmost symbols and detects the attack if any draw lands in the
//! hidden set. Trial `t` uses its own ChaCha8 stream keyed by the first eight
//! bytes of `SHA-256(seed || t)`, so reports depend only on the config.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::hiding_blocks_decode;
use crate::error::{Error, Result};
use crate::freezing::{prob_failure, CodeSpec};
use crate::hash::hash_concat;
use crate::polar_graph::FactorGraph;

/// 97.5th percentile of the standard normal.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Hide the leaf set of the cheapest information row.
    Optimal,
    /// Hide these CMT labels.
    Given(Vec<usize>),
    /// Hide this many eligible labels chosen by the seeded generator.
    Random(usize),
}

#[derive(Clone, Debug)]
pub struct AttackConfig {
    pub spec: CodeSpec,
    pub strategy: Strategy,
    pub samples_per_node: u64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub n: usize,
    pub k: usize,
    /// Hidden CMT labels, ascending.
    pub hidden_set: Vec<usize>,
    pub samples_per_node: u64,
    pub detected_count: u64,
    pub trials: u64,
    pub pf_estimate: f64,
    pub pf_analytic: f64,
    pub wilson_95_interval: (f64, f64),
    /// The hidden set does not stop the decoder, so nothing is withheld.
    pub non_attack: bool,
    pub seed: u64,
}

/// Rightmost-column CMT labels whose FG row is at most `N - mu2`, ascending.
pub fn eligible_positions(spec: &CodeSpec) -> Vec<usize> {
    let mut labels: Vec<usize> = (1..=spec.eligible_rows()).map(|row| spec.fg_to_cmt(row)).collect();
    labels.sort_unstable();
    labels
}

/// Leaf set of the stopping tree rooted at the lowest information row with the
/// smallest leaf set, as CMT labels.
pub fn optimal_hiding_set(spec: &CodeSpec) -> Result<Vec<usize>> {
    let graph = FactorGraph::build(spec.n())?;
    optimal_hiding_set_on(&graph, spec)
}

pub fn optimal_hiding_set_on(graph: &FactorGraph, spec: &CodeSpec) -> Result<Vec<usize>> {
    let mut labels: Vec<usize> =
        graph.leaf_set(spec.argmin_info_leaf())?.into_iter().map(|row| spec.fg_to_cmt(row)).collect();
    labels.sort_unstable();
    Ok(labels)
}

pub fn analytic_pf(spec: &CodeSpec, s: u64) -> f64 {
    prob_failure(spec, s)
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Generator for stream `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let digest = hash_concat([&seed.to_be_bytes()[..], &index.to_be_bytes()[..]]);
    ChaCha8Rng::seed_from_u64(u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")))
}

fn hidden_labels(graph: &FactorGraph, config: &AttackConfig, eligible: &[usize]) -> Result<Vec<usize>> {
    let mut hidden = match &config.strategy {
        Strategy::Optimal => optimal_hiding_set_on(graph, &config.spec)?,
        Strategy::Given(labels) => {
            if let Some(bad) = labels.iter().find(|l| eligible.binary_search(l).is_err()) {
                return Err(Error::InvalidParameter(format!("label {bad} is not an eligible position")));
            }
            labels.clone()
        }
        Strategy::Random(size) => {
            if *size > eligible.len() {
                return Err(Error::InvalidParameter(format!(
                    "cannot hide {size} of {} eligible positions",
                    eligible.len()
                )));
            }
            // Stream u64::MAX is reserved for choosing the set.
            let mut rng = trial_rng(config.seed, u64::MAX);
            index::sample(&mut rng, eligible.len(), *size).into_iter().map(|i| eligible[i]).collect()
        }
    };
    hidden.sort_unstable();
    hidden.dedup();
    Ok(hidden)
}

pub fn run_trials(config: &AttackConfig) -> Result<TrialReport> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let spec = &config.spec;
    let graph = FactorGraph::build(spec.n())?;
    let eligible = eligible_positions(spec);
    let hidden = hidden_labels(&graph, config, &eligible)?;

    let hidden_rows: BTreeSet<usize> = hidden.iter().map(|&l| spec.cmt_to_fg(l)).collect();
    let non_attack = !hiding_blocks_decode(&graph, spec, &hidden_rows);

    let mut is_hidden = vec![false; spec.n() + 1];
    for &l in &hidden {
        is_hidden[l] = true;
    }
    let detected_count = (0..config.trials)
        .filter(|&t| {
            let mut rng = trial_rng(config.seed, t);
            (0..config.samples_per_node).any(|_| is_hidden[eligible[rng.gen_range(0..eligible.len())]])
        })
        .count() as u64;

    let undetected = config.trials - detected_count;
    Ok(TrialReport {
        n: spec.n(),
        k: spec.k(),
        hidden_set: hidden,
        samples_per_node: config.samples_per_node,
        detected_count,
        trials: config.trials,
        pf_estimate: undetected as f64 / config.trials as f64,
        pf_analytic: analytic_pf(spec, config.samples_per_node),
        wilson_95_interval: wilson(undetected, config.trials, Z_95),
        non_attack,
        seed: config.seed,
    })
}
