//! Critical flags and child bitmaps on a small ff tree, checked against the
//! from-scratch classification.

use ffbtree::{NodeClass, Tree, Variant};

pub fn run_example() -> anyhow::Result<()> {
    let mut t = Tree::with_capacity(4, Variant::Ff)?;
    for k in [50, 10, 90, 30, 70, 20, 60, 80, 40, 15, 35, 55] {
        let r = t.insert(k, k)?;
        println!("insert {k:>2}: splits {} total {}", r.splits, r.total);
    }
    let classes = t.classify_all();
    for (id, depth) in t.nodes() {
        let n = t.node(id).expect("reachable");
        let bits: String = n
            .child_bitmap
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect();
        println!(
            "{:indent$}{id:?} keys {:?} flag {} bits [{bits}] class {:?}",
            "",
            n.keys,
            n.critical,
            classes[id.index()].expect("classified"),
            indent = depth * 2
        );
    }
    let unsafe_nodes = classes
        .iter()
        .flatten()
        .filter(|c| **c == NodeClass::Unsafe)
        .count();
    assert_eq!(unsafe_nodes, 0);
    assert!(t.verify_flag_consistency().ok);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
