//! Per-height insert cost under sequential load. The baseline's worst case
//! grows with every level; ff stays within a few I/Os of the floor.
//!
//! cargo run --release --example sequential_fluctuation -- 1000000

use ffbtree::metrics::per_height_stats;
use ffbtree::workload::{gen_sequential, Direction};
use ffbtree::{Tree, Variant};

pub fn run(n: usize) -> anyhow::Result<()> {
    let keys = gen_sequential(n, Direction::Asc);
    for v in Variant::ALL {
        let mut t = Tree::with_capacity(8, v)?;
        let reports = keys
            .iter()
            .map(|&k| t.insert(k, k))
            .collect::<Result<Vec<_>, _>>()?;
        println!("{v}:");
        for (h, s) in per_height_stats(&reports) {
            println!(
                "  height {h:>2}: min {:>2} p50 {:>2} p95 {:>2} max {:>2}",
                s.min, s.p50, s.p95, s.max
            );
        }
    }
    Ok(())
}

pub fn run_example() -> anyhow::Result<()> {
    run(50_000)
}

fn main() -> anyhow::Result<()> {
    let n = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(200_000);
    run(n)
}
