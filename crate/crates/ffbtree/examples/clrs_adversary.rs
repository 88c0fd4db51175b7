//! An adaptive stream that keeps a CLRS shadow tree and steers inserts until
//! the whole root-to-leaf path is full. Its last key costs CLRS `3H + 1`;
//! the same stream replayed into ff never splits more than once.

use ffbtree::workload::{gen_clrs_adversary, AdversaryConfig};
use ffbtree::{Tree, Variant};

pub fn run_example() -> anyhow::Result<()> {
    for (capacity, n) in [(3, 20), (8, 5_000)] {
        let stream = gen_clrs_adversary(n, &AdversaryConfig::new(capacity, 7))?;
        let mut clrs = Tree::with_capacity(capacity, Variant::Clrs)?;
        let mut ff = Tree::with_capacity(capacity, Variant::Ff)?;
        let mut last = None;
        let mut ff_max_splits = 0;
        for &k in &stream.keys {
            last = Some((clrs.height(), clrs.insert(k, k)?));
            ff_max_splits = ff_max_splits.max(ff.insert(k, k)?.splits);
        }
        let (h, r) = last.expect("non-empty stream");
        println!(
            "C={capacity}: {} keys, {} traps; final CLRS insert at H={h}: total {} splits {}; ff max splits {ff_max_splits}",
            stream.keys.len(),
            stream.traps.len(),
            r.total,
            r.splits
        );
        assert_eq!(r.total, 3 * h as u64 + 1);
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
