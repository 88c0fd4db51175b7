//! Optimistic concurrent inserts with injected device latency. After every
//! sweep point the tree is checked against the inserted key set.

use ffbtree::olc::{run_concurrent, LatencyConfig};
use ffbtree::workload::gen_zipfian;
use ffbtree::{TreeConfig, Variant};

pub fn run(n: usize, actors: &[usize]) -> anyhow::Result<()> {
    let keys = gen_zipfian(n, 3, 0.99, 1 << 40)?;
    println!("variant actors  mean_lat_us  range_us  restarts  max_splits");
    for v in [Variant::Clrs, Variant::Ff] {
        for &a in actors {
            let r = run_concurrent(TreeConfig::new(8, v), &keys, a, LatencyConfig::default(), n)?;
            println!(
                "{:<7} {a:>6} {:>12.1} {:>9.1} {:>9.4} {:>11}",
                v.to_string(),
                r.mean_latency_ns / 1e3,
                r.mean_windowed_range_ns / 1e3,
                r.mean_restarts,
                r.max_splits
            );
            assert_eq!(r.lost_keys + r.structural_violations + r.unsafe_nodes, 0);
        }
    }
    Ok(())
}

pub fn run_example() -> anyhow::Result<()> {
    run(5_000, &[1, 4])
}

fn main() -> anyhow::Result<()> {
    run(50_000, &[1, 2, 4, 8, 16, 32])
}
