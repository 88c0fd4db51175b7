//! Tail views of insert cost: fluctuation CCDF, the largest peaks, and
//! binned maxima over the insert sequence.

use ffbtree::metrics::MetricsSummary;
use ffbtree::workload::gen_uniform;
use ffbtree::{Tree, Variant};

pub fn run(n: usize) -> anyhow::Result<()> {
    let keys = gen_uniform(n, 11, 1 << 40)?;
    for v in [Variant::Baseline, Variant::Ff] {
        let mut t = Tree::with_capacity(8, v)?;
        let reports = keys
            .iter()
            .map(|&k| t.insert(k, k))
            .collect::<Result<Vec<_>, _>>()?;
        let s = MetricsSummary::build(&reports, &t, 5, 10)?;
        println!("{v}: max fluctuation {}", s.max_fluctuation);
        for (x, p) in &s.fluct_ccdf {
            println!("  P(fluct >= {x:>2}) = {p:.5}");
        }
        let peaks: Vec<_> = s.top_k.iter().map(|p| (p.value, p.index)).collect();
        println!("  top peaks (io, insert): {peaks:?}");
        let bins: Vec<_> = s.binned_max.iter().map(|b| b.max).collect();
        println!("  binned max: {bins:?}");
    }
    Ok(())
}

pub fn run_example() -> anyhow::Result<()> {
    run(30_000)
}

fn main() -> anyhow::Result<()> {
    run(1_000_000)
}
