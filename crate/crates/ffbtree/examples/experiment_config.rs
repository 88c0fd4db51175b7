//! Drive the experiment runner from a JSON config, as `ffbench --config`
//! does, and list the artifacts it writes.

use ffbtree::experiment::{run_experiment, ExperimentConfig};

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let json = format!(
        r#"{{
            "variants": ["baseline", "ff"],
            "workloads": ["uniform"],
            "sizes": [20000],
            "check_invariants": 1000,
            "bins": 100,
            "out": {:?}
        }}"#,
        dir.path()
    );
    let config = ExperimentConfig::from_json(&json)?;
    let manifest = run_experiment(&config)?;
    for r in &manifest.runs {
        println!(
            "{} {} n={}: height {} max splits {} max fluctuation {} ({} sweeps)",
            r.variant,
            r.workload,
            r.n,
            r.height,
            r.max_splits,
            r.max_fluctuation,
            r.invariant_sweeps
        );
    }
    let mut files: Vec<_> = std::fs::read_dir(dir.path())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("artifacts: {files:?}");
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
