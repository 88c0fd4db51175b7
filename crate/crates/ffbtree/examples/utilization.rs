//! Space cost of splitting early: node occupancy for baseline and ff.

use ffbtree::metrics::utilization;
use ffbtree::workload::{Family, WorkloadSpec};
use ffbtree::{Tree, Variant};

pub fn run_example() -> anyhow::Result<()> {
    for family in [Family::Sequential, Family::Uniform] {
        let keys = WorkloadSpec::new(family, 50_000, 5).generate()?;
        for v in [Variant::Baseline, Variant::Ff] {
            let mut t = Tree::with_capacity(8, v)?;
            for &k in &keys {
                t.insert(k, k)?;
            }
            let u = utilization(&t);
            println!(
                "{:<10} {:<8} leaves {:>6} ({:>5.1}% < half)  internal {:>5} ({:>5.1}% < half)",
                family.name(),
                v.to_string(),
                u.leaf_nodes,
                u.pct_below_50_leaf,
                u.internal_nodes,
                u.pct_below_50_internal
            );
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
