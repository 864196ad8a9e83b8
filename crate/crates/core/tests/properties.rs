use std::collections::BTreeSet;

use pcmt_core::attack_sim::{eligible_positions, optimal_hiding_set, run_trials, AttackConfig, Strategy as Hide};
use pcmt_core::codec::{check_constraints, hiding_blocks_decode, peel_decode, systematic_encode, Assignment};
use pcmt_core::freezing::{sef_freeze_on, undecodable_threshold};
use pcmt_core::metrics::{lcmt_metrics, pcmt_metrics};
use pcmt_core::pcmt::{verify_inclusion, Coords, IcProof, MerkleProof, PcmtLayout, PcmtParams, PcmtTree};
use pcmt_core::{Chunk, DecodeOutcome, FactorGraph, VnId};
use proptest::prelude::*;

fn n_and_k(max: usize) -> impl Strategy<Value = (usize, usize)> {
    (2..=max).prop_flat_map(|n| (Just(n), 1..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leaf_sets_are_stopping_trees(n in 2usize..=48) {
        let g = FactorGraph::build(n).unwrap();
        let sizes = g.leaf_set_sizes();
        for row in 1..=n {
            let tree = g.stopping_tree(row).unwrap();
            prop_assert!(g.is_stopping_set(&tree));
            let roots: Vec<VnId> = tree.iter().filter(|v| v.column == 1).copied().collect();
            prop_assert_eq!(roots, vec![VnId::new(1, row as u32)]);
            prop_assert_eq!(g.leaf_set(row).unwrap().len() as u64, sizes.get(row));
        }
    }

    #[test]
    fn sef_structure((n, k) in n_and_k(96)) {
        let g = FactorGraph::build(n).unwrap();
        let spec = sef_freeze_on(&g, k).unwrap();
        prop_assert_eq!(spec.frozen().len(), n - k);
        let threshold = spec.leaf_sizes().kth_smallest(n - k);
        for row in 1..=n {
            if spec.leaf_sizes().get(row) < threshold {
                prop_assert!(spec.is_frozen(row));
            }
        }
        for row in spec.eligible_rows() + 1..=n {
            prop_assert!(spec.is_frozen(row));
        }
        prop_assert!(spec.mu2() == 0 || !spec.is_frozen(spec.eligible_rows()));
        let mut perm = spec.cmt_perm().to_vec();
        perm.sort_unstable();
        prop_assert_eq!(perm, (1..=n).collect::<Vec<_>>());
        for label in 1..=n {
            prop_assert_eq!(spec.fg_to_cmt(spec.cmt_to_fg(label)), label);
            prop_assert_eq!(label <= k, !spec.is_frozen(spec.cmt_to_fg(label)));
        }
        let alpha = undecodable_threshold(&spec);
        prop_assert!(alpha >= num_rational::Ratio::from_integer(spec.min_info_leaf()));
    }

    #[test]
    fn encode_then_decode_from_eligible((n, k) in n_and_k(64), seed in any::<u64>(), keep in 0.0f64..1.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = FactorGraph::build(n).unwrap();
        let spec = sef_freeze_on(&g, k).unwrap();
        let data: Vec<Chunk> = (0..k).map(|_| Chunk::new(vec![rng.gen(), rng.gen(), rng.gen()])).collect();
        let coded = systematic_encode(&g, &spec, &data).unwrap();
        prop_assert!(check_constraints(&g, &coded));

        let right = g.rightmost_column();
        let mut known = Assignment::empty(&g, 3);
        let mut hidden = BTreeSet::new();
        for row in 1..=spec.eligible_rows() {
            let id = VnId::new(right, row as u32);
            if rng.gen_bool(keep) {
                known.set(id, coded.get(id).unwrap().clone());
            } else {
                hidden.insert(row);
            }
        }
        match peel_decode(&g, &spec, &known).unwrap() {
            DecodeOutcome::Complete { assignment, .. } => {
                prop_assert_eq!(assignment, coded);
                prop_assert!(!hiding_blocks_decode(&g, &spec, &hidden));
            }
            DecodeOutcome::Stuck(report) => {
                prop_assert!(!report.unresolved.is_empty());
                prop_assert!(hiding_blocks_decode(&g, &spec, &hidden));
                prop_assert!(hidden.len() as u64 >= spec.min_info_leaf());
            }
        }
    }

    #[test]
    fn optimal_set_blocks_decoding((n, k) in n_and_k(64)) {
        let g = FactorGraph::build(n).unwrap();
        let spec = sef_freeze_on(&g, k).unwrap();
        let set = optimal_hiding_set(&spec).unwrap();
        prop_assert_eq!(set.len() as u64, spec.min_info_leaf());
        let eligible = eligible_positions(&spec);
        prop_assert!(set.iter().all(|l| eligible.contains(l)));
        let rows: BTreeSet<usize> = set.iter().map(|&l| spec.cmt_to_fg(l)).collect();
        prop_assert!(hiding_blocks_decode(&g, &spec, &rows));
    }

    #[test]
    fn attack_report_bounds((n, k) in n_and_k(32), s in 0u64..6, seed in any::<u64>()) {
        let spec = sef_freeze_on(&FactorGraph::build(n).unwrap(), k).unwrap();
        let r = run_trials(&AttackConfig { spec, strategy: Hide::Optimal, samples_per_node: s, trials: 200, seed }).unwrap();
        prop_assert!(r.detected_count <= r.trials);
        prop_assert_eq!(r.pf_estimate, (r.trials - r.detected_count) as f64 / r.trials as f64);
        prop_assert!(r.wilson_95_interval.0 <= r.pf_estimate && r.pf_estimate <= r.wilson_95_interval.1);
        prop_assert!(!r.non_attack);
        if s == 0 {
            prop_assert_eq!(r.pf_estimate, 1.0);
        }
    }
}

fn small_params() -> impl Strategy<Value = PcmtParams> {
    prop_oneof![
        (1u32..=3, 1u32..=24).prop_map(|(l, c)| PcmtParams::new(4 << (l - 1), 1, 2, 4, l, c)),
        (1u32..=3, 1u32..=24).prop_map(|(l, c)| PcmtParams::new(2 << (2 * (l - 1)), 1, 4, 8, l, c)),
        (1u32..=2, 1u32..=24).prop_map(|(l, c)| PcmtParams::new(12, 2, 5, 5, l, c)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_symbols_verify_and_round_trip(params in small_params(), fill in 0.0f64..=1.0, seed in any::<u8>()) {
        prop_assume!(PcmtLayout::new(params).is_ok());
        let len = (params.block_bytes() as f64 * fill) as usize;
        let block: Vec<u8> = (0..len).map(|i| (i as u8).wrapping_mul(seed).wrapping_add(3)).collect();
        let tree = PcmtTree::build(params, &block).unwrap();
        prop_assert_eq!(tree.block(), block);
        let layout = tree.layout();
        let l = layout.n_layers();
        let base = layout.base();
        for row in 1..=base.n as u32 {
            let c = Coords::new(l, base.top_column(), row);
            let proof = tree.merkle_proof(c).unwrap();
            prop_assert!(verify_inclusion(layout, tree.root(), tree.symbol(c).unwrap(), c, &proof));
            let back = MerkleProof::from_bytes(layout, &proof.to_bytes()).unwrap();
            prop_assert_eq!(back, proof);
        }
        let restored = PcmtTree::from_container(&tree.to_container()).unwrap();
        prop_assert_eq!(restored.root(), tree.root());
        prop_assert_eq!(restored.layers(), tree.layers());
    }

    #[test]
    fn proof_parsers_reject_garbage(bytes in proptest::collection::vec(any::<u8>(), 0..600)) {
        let layout = PcmtLayout::new(PcmtParams::new(16, 1, 2, 4, 2, 8)).unwrap();
        let _ = MerkleProof::from_bytes(&layout, &bytes);
        let _ = IcProof::from_bytes(&layout, &bytes);
        let _ = PcmtTree::from_container(&bytes);
    }

    #[test]
    fn pcmt_lcmt_sample_gap(l in 1u32..=8, c in 1u32..1_000_000) {
        let p = PcmtParams::new(4 << (l - 1), 1, 2, 4, l, c);
        let sizes = p.layer_sizes().unwrap();
        let sum: u64 = sizes[..sizes.len() - 1].iter().map(|&n| pcmt_core::polar_graph::ceil_log2(n) as u64).sum();
        let gap = pcmt_metrics(&p, 0.01).unwrap().single_sample_bytes - lcmt_metrics(&p, 7, None, 0.01).unwrap().single_sample_bytes;
        prop_assert_eq!(gap, 2 * 4 * 32 * sum);
    }
}
