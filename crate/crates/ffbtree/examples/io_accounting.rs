//! Per-operation I/O accounting: a lookup reads one node per level, an
//! insert that splits nothing costs `height + 1`.

use ffbtree::{Tree, Variant};

pub fn run_example() -> anyhow::Result<()> {
    let mut tree = Tree::with_capacity(8, Variant::Baseline)?;
    for k in 0..5_000u64 {
        tree.insert(k * 2, k)?;
    }
    let (found, io) = tree.lookup_io(1_234)?;
    println!(
        "height {}: lookup(1234) -> {found:?}, {} reads",
        tree.height(),
        io.reads
    );

    let r = tree.insert(1_235, 0)?;
    println!(
        "insert 1235: reads {} writes {} total {} splits {} (floor {})",
        r.reads,
        r.writes,
        r.total,
        r.splits,
        r.height + 1
    );
    assert_eq!(r.total, r.height as u64 + 1);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
