use std::collections::BTreeMap;

use ffbtree::metrics::{ccdf, per_height_stats};
use ffbtree::{Node, NodeClass, NodeId, Tree, Variant};
use proptest::prelude::*;

/// Smallest capacity at which ff's one-split and no-unsafe guarantees hold.
const FF_MIN_CAPACITY: usize = 4;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Baseline),
        Just(Variant::Clrs),
        Just(Variant::Ff)
    ]
}

/// Key streams with plenty of duplicates and runs.
fn keys(max_len: usize) -> impl Strategy<Value = Vec<u64>> {
    prop_oneof![
        prop::collection::vec(0u64..500, 0..max_len),
        prop::collection::vec(any::<u64>(), 0..max_len),
        (0u64..1000, 1..max_len).prop_map(|(start, n)| (start..start + n as u64).collect()),
        (0u64..1000, 1..max_len).prop_map(|(start, n)| (start..start + n as u64).rev().collect()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matches_ordered_map(v in variant(), cap in 3usize..=12, ks in keys(600)) {
        let mut t = Tree::with_capacity(cap, v).unwrap();
        let mut oracle = BTreeMap::new();
        for (i, &k) in ks.iter().enumerate() {
            let r = t.insert(k, i as u64).unwrap();
            oracle.insert(k, i as u64);
            prop_assert!(r.reads <= r.height as u64 + 1);
            if r.splits == 0 {
                prop_assert_eq!(r.reads, r.height as u64);
                if v != Variant::Ff {
                    prop_assert_eq!(r.total, r.height as u64 + 1);
                }
            }
            prop_assert!(r.splits as usize <= r.height as usize + 1);
            if v == Variant::Baseline {
                prop_assert!(r.fluctuation <= 2 * r.height as u64);
            }
        }
        prop_assert_eq!(t.len(), oracle.len());
        prop_assert_eq!(t.scan_all(), oracle.keys().copied().collect::<Vec<_>>());
        for (k, p) in &oracle {
            prop_assert_eq!(t.lookup(*k).unwrap(), Some(*p));
        }
        prop_assert!(t.check_structure().is_empty(), "{:?}", t.check_structure());
    }

    #[test]
    fn variants_hold_the_same_keys(cap in 3usize..=10, ks in keys(400)) {
        let sets: Vec<Vec<u64>> = Variant::ALL
            .iter()
            .map(|&v| {
                let mut t = Tree::with_capacity(cap, v).unwrap();
                for &k in &ks {
                    t.insert(k, k).unwrap();
                }
                t.scan_all()
            })
            .collect();
        prop_assert_eq!(&sets[0], &sets[1]);
        prop_assert_eq!(&sets[1], &sets[2]);
    }

    #[test]
    fn ff_one_split_and_no_unsafe(cap in FF_MIN_CAPACITY..=12, ks in keys(800)) {
        let mut t = Tree::with_capacity(cap, Variant::Ff).unwrap();
        for &k in &ks {
            let r = t.insert(k, k).unwrap();
            prop_assert!(r.splits <= 1, "{} splits at C={}", r.splits, cap);
            let rep = t.verify_no_unsafe();
            prop_assert!(rep.ok, "unsafe {:?} after {}", rep.offending, k);
        }
        let flags = t.verify_flag_consistency();
        prop_assert!(flags.ok, "{:?}", flags);
    }

    #[test]
    fn ff_state_transitions(cap in FF_MIN_CAPACITY..=8, ks in keys(250)) {
        let mut t = Tree::with_capacity(cap, Variant::Ff).unwrap();
        let mut before = t.classify_all();
        for &k in &ks {
            let sizes: Vec<usize> = (0..before.len()).map(|i| t.node(NodeId(i as u32)).unwrap().len()).collect();
            t.insert(k, k).unwrap();
            let after = t.classify_all();
            for (i, (b, a)) in before.iter().zip(&after).enumerate() {
                let (Some(b), Some(a)) = (b, a) else { continue };
                let split = t.node(NodeId(i as u32)).unwrap().len() < sizes[i];
                prop_assert!(*a != NodeClass::Unsafe, "node {} became unsafe", i);
                if *b == NodeClass::Critical && *a == NodeClass::SafeNonCritical {
                    prop_assert!(split, "node {} left critical without splitting", i);
                }
            }
            before = after;
        }
    }

    #[test]
    fn leaf_split_conserves_keys(mut ks in prop::collection::btree_set(any::<u64>(), 2..40)) {
        let keys: Vec<u64> = std::mem::take(&mut ks).into_iter().collect();
        let mut left = Node::leaf(keys.clone());
        let (right, sep) = left.split().unwrap();
        prop_assert_eq!(sep, right.keys[0]);
        prop_assert_eq!(right.len(), keys.len().div_ceil(2));
        let joined: Vec<u64> = left.keys.iter().chain(&right.keys).copied().collect();
        prop_assert_eq!(joined, keys);
        prop_assert_eq!(left.values.len() + right.values.len(), left.len() + right.len());
    }

    #[test]
    fn internal_split_conserves_keys_children_and_bits(
        ks in prop::collection::btree_set(any::<u64>(), 1..40),
        seed in any::<u64>(),
    ) {
        let keys: Vec<u64> = ks.into_iter().collect();
        let children: Vec<NodeId> = (0..=keys.len() as u32).map(NodeId).collect();
        let bits: Vec<bool> = (0..children.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let mut left = Node::internal(keys.clone(), children.clone());
        left.child_bitmap = bits.clone();
        let (right, sep) = left.split().unwrap();
        let joined: Vec<u64> = left.keys.iter().chain([&sep]).chain(&right.keys).copied().collect();
        prop_assert_eq!(joined, keys);
        prop_assert_eq!([left.children.clone(), right.children.clone()].concat(), children);
        prop_assert_eq!([left.child_bitmap.clone(), right.child_bitmap.clone()].concat(), bits);
    }

    #[test]
    fn ccdf_is_normalized_and_non_increasing(vs in prop::collection::vec(0u64..20, 1..300)) {
        let c = ccdf(&vs);
        prop_assert_eq!(c[0], (*vs.iter().min().unwrap(), 1.0));
        prop_assert!(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1));
        let max = *vs.iter().max().unwrap();
        let last = c[c.len() - 1];
        prop_assert_eq!(last.0, max);
        let tail = vs.iter().filter(|v| **v == max).count() as f64 / vs.len() as f64;
        prop_assert!((last.1 - tail).abs() < 1e-12);
    }

    #[test]
    fn percentiles_are_ordered(v in variant(), ks in keys(500)) {
        let mut t = Tree::with_capacity(4, v).unwrap();
        let reports: Vec<_> = ks.iter().map(|&k| t.insert(k, k).unwrap()).collect();
        for s in per_height_stats(&reports).values() {
            prop_assert!(s.min <= s.p50 && s.p50 <= s.p95 && s.p95 <= s.max);
        }
    }
}
