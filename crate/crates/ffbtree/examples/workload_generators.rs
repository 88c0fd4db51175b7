//! The four key streams and the keyfile format used to replay them.

use ffbtree::workload::{read_keys, write_keys, Direction, Family, KeyFormat, WorkloadSpec};

pub fn run_example() -> anyhow::Result<()> {
    for family in [
        Family::Sequential,
        Family::Uniform,
        Family::Zipfian,
        Family::ClrsAdversary,
    ] {
        let keys = WorkloadSpec::new(family, 10_000, 42).generate()?;
        println!(
            "{:<15} {} keys, first {:?}",
            family.name(),
            keys.len(),
            &keys[..4]
        );
    }
    let desc = WorkloadSpec {
        direction: Direction::Desc,
        ..WorkloadSpec::new(Family::Sequential, 5, 0)
    };
    println!("descending: {:?}", desc.generate()?);

    // skew: share of inserts landing in the hottest 1% of key regions
    let keys = WorkloadSpec::new(Family::Zipfian, 100_000, 1).generate()?;
    let mut per_region = std::collections::HashMap::<u64, usize>::new();
    for k in &keys {
        *per_region.entry(k >> 26).or_default() += 1;
    }
    let mut counts: Vec<usize> = per_region.into_values().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let hot: usize = counts.iter().take(100).sum();
    println!(
        "zipfian: hottest 100 regions take {:.1}% of inserts",
        100.0 * hot as f64 / keys.len() as f64
    );

    let dir = tempfile::tempdir()?;
    for format in [KeyFormat::Text, KeyFormat::Binary] {
        let path = dir.path().join(format!("keys.{format:?}"));
        write_keys(&path, &keys, format)?;
        assert_eq!(read_keys(&path, format)?, keys);
        println!(
            "{format:?} keyfile: {} bytes",
            std::fs::metadata(&path)?.len()
        );
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
