use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ffbtree::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use ffbtree::workload::{Direction, Family, KeyFormat};
use ffbtree::Variant;

/// Run insert-cost experiments and write CSV/JSON artifacts.
///
/// Flags override values from `--config`. List flags take comma-separated values.
#[derive(Debug, Parser)]
#[command(name = "ffbench", version)]
struct Cli {
    /// JSON experiment config; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    variant: Option<Vec<Variant>>,
    #[arg(long, value_delimiter = ',')]
    workload: Option<Vec<Family>>,
    /// Dataset sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Entries per node.
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bins for the binned-maximum series [default: 1200].
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    topk: Option<usize>,
    /// Actor counts for concurrent sweeps (clrs and ff only).
    #[arg(long, value_delimiter = ',')]
    actors: Option<Vec<usize>>,
    /// Injected read latency in microseconds [default: 1].
    #[arg(long)]
    read_lat: Option<u64>,
    /// Injected write latency in microseconds [default: 2].
    #[arg(long)]
    write_lat: Option<u64>,
    /// Window for the latency range statistic [default: 100000].
    #[arg(long)]
    window: Option<usize>,
    /// Sweep all invariants every STRIDE inserts [default stride: 1000].
    #[arg(long, value_name = "STRIDE", num_args = 0..=1, default_missing_value = "1000", require_equals = true)]
    check_invariants: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replay a recorded key file instead of generating workloads.
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Save the generated key stream.
    #[arg(long, value_name = "FILE")]
    emit_keys: Option<PathBuf>,
    #[arg(long)]
    key_format: Option<KeyFormat>,
    /// Order of the sequential workload.
    #[arg(long)]
    direction: Option<Direction>,
    /// Zipfian skew.
    #[arg(long)]
    theta: Option<f64>,
}

impl Cli {
    fn into_config(self) -> Result<ExperimentConfig, ExperimentError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag { $field = v; })*
            };
        }
        set! {
            variant => c.variants,
            workload => c.workloads,
            n => c.sizes,
            capacity => c.capacity,
            seed => c.seed,
            bins => c.bins,
            topk => c.topk,
            actors => c.actors,
            read_lat => c.latency.read_us,
            write_lat => c.latency.write_us,
            window => c.window,
            out => c.out,
            key_format => c.key_format,
            direction => c.direction,
            theta => c.theta,
        }
        if self.check_invariants.is_some() {
            c.check_invariants = self.check_invariants;
        }
        if self.replay.is_some() {
            c.replay = self.replay;
        }
        if self.emit_keys.is_some() {
            c.emit_keys = self.emit_keys;
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let result = Cli::parse().into_config().and_then(|c| run_experiment(&c));
    match result {
        Ok(m) => {
            for r in &m.runs {
                println!(
                    "{:<8} {:<20} n={:<8} height={:<3} max_splits={} max_fluctuation={}",
                    r.variant.to_string(),
                    r.workload,
                    r.n,
                    r.height,
                    r.max_splits,
                    r.max_fluctuation
                );
            }
            println!(
                "artifacts in {} ({:.1}s)",
                m.config.out.display(),
                m.wall_time_s
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ffbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
