//! Experiment matrix runner behind the `ffbench` binary.
//!
//! A run builds a fresh tree for every (variant, workload, size) triple,
//! loads the key stream, collects one [`InsertReport`] per insert, and
//! appends the metrics to one CSV file per metric in the output directory.
//! Concurrent sweeps go to `concurrent.csv`; `run.json` records the config,
//! a build id and timings.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::TreeError;
use crate::metrics::{MetricsError, MetricsSummary};
use crate::node::Key;
use crate::olc::{run_concurrent, LatencyConfig, OlcError};
use crate::tree::{InsertReport, Tree, TreeConfig, Variant};
use crate::workload::{
    read_keys, write_keys, Direction, Family, KeyFormat, WorkloadError, WorkloadSpec,
    DEFAULT_KEY_SPACE, DEFAULT_THETA,
};

pub const BUILD_ID: &str = env!("FFBENCH_BUILD_ID");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(
        "invariant `{rule}` violated at insert {index} ({variant}, {workload}, n={n}): {detail}"
    )]
    Invariant {
        rule: String,
        index: usize,
        variant: Variant,
        workload: String,
        n: usize,
        detail: String,
    },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Olc(#[from] OlcError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Invariant { .. } => 3,
            _ => 1,
        }
    }
}

/// Which per-run metric files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricToggles {
    pub per_height: bool,
    pub ccdf: bool,
    pub topk: bool,
    pub binned_max: bool,
    pub utilization: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        MetricToggles {
            per_height: true,
            ccdf: true,
            topk: true,
            binned_max: true,
            utilization: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub variants: Vec<Variant>,
    pub workloads: Vec<Family>,
    pub sizes: Vec<usize>,
    pub capacity: usize,
    pub seed: u64,
    pub direction: Direction,
    pub theta: f64,
    pub key_space: u64,
    pub bins: usize,
    pub topk: usize,
    pub window: usize,
    /// Full invariant sweep every this many inserts.
    pub check_invariants: Option<usize>,
    /// Actor counts for concurrent sweeps; empty skips them.
    pub actors: Vec<usize>,
    pub latency: LatencyConfig,
    pub metrics: MetricToggles,
    pub out: PathBuf,
    /// Load keys from this file instead of generating workloads.
    pub replay: Option<PathBuf>,
    /// Save the generated stream (one workload, one size).
    pub emit_keys: Option<PathBuf>,
    pub key_format: KeyFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variants: vec![Variant::Ff],
            workloads: vec![Family::Sequential],
            sizes: vec![100_000],
            capacity: 8,
            seed: 0,
            direction: Direction::Asc,
            theta: DEFAULT_THETA,
            key_space: DEFAULT_KEY_SPACE,
            bins: 1200,
            topk: 10,
            window: 100_000,
            check_invariants: None,
            actors: Vec::new(),
            latency: LatencyConfig::default(),
            metrics: MetricToggles::default(),
            out: PathBuf::from("results"),
            replay: None,
            emit_keys: None,
            key_format: KeyFormat::Text,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.variants.is_empty() {
            return bad("no variants");
        }
        if self.replay.is_none() && (self.workloads.is_empty() || self.sizes.is_empty()) {
            return bad("no workloads or sizes");
        }
        if self.sizes.contains(&0) {
            return bad("sizes must be positive");
        }
        if self.capacity < 3 {
            return bad("capacity must be at least 3");
        }
        if self.bins == 0 || self.topk == 0 || self.window == 0 {
            return bad("bins, topk and window must be at least 1");
        }
        if self.check_invariants == Some(0) {
            return bad("invariant stride must be at least 1");
        }
        if self.actors.contains(&0) {
            return bad("actor counts must be positive");
        }
        if self.emit_keys.is_some() && self.streams().len() != 1 {
            return bad("emit-keys needs exactly one workload and one size");
        }
        if self.replay.is_some() && self.emit_keys.is_some() {
            return bad("replay and emit-keys are exclusive");
        }
        Ok(())
    }

    fn streams(&self) -> Vec<(Family, usize)> {
        self.workloads
            .iter()
            .flat_map(|w| self.sizes.iter().map(move |n| (*w, *n)))
            .collect()
    }

    fn spec(&self, family: Family, n: usize) -> WorkloadSpec {
        WorkloadSpec {
            family,
            n,
            seed: self.seed,
            direction: self.direction,
            theta: self.theta,
            key_space: self.key_space,
            capacity: self.capacity,
        }
    }
}

/// Headline numbers of one sequential run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub workload: String,
    pub n: usize,
    pub inserts: usize,
    pub height: usize,
    pub max_splits: u32,
    pub max_fluctuation: u64,
    pub pct_below_50_leaf: f64,
    pub pct_below_50_internal: f64,
    pub invariant_sweeps: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub build_id: String,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub runs: Vec<RunRecord>,
}

/// Full-tree check: structure for every variant, no unsafe node for ff.
/// Returns the first broken rule.
pub fn sweep_invariants(tree: &Tree) -> Option<(&'static str, String)> {
    if let Some(v) = tree.check_structure().first() {
        return Some(("structure", v.to_string()));
    }
    if tree.variant() == Variant::Ff {
        let rep = tree.verify_no_unsafe();
        if !rep.ok {
            return Some(("no unsafe node", format!("{:?}", rep.offending)));
        }
    }
    None
}

/// Load `keys` into a fresh tree, checking invariants every `stride` inserts.
pub fn load_tree(
    config: TreeConfig,
    keys: &[Key],
    stride: Option<usize>,
    label: &str,
) -> Result<(Tree, Vec<InsertReport>, usize), ExperimentError> {
    let mut tree = Tree::new(config)?;
    let mut reports = Vec::with_capacity(keys.len());
    let mut sweeps = 0;
    let fail = |rule: &str, index: usize, detail: String| ExperimentError::Invariant {
        rule: rule.into(),
        index,
        variant: config.variant,
        workload: label.into(),
        n: keys.len(),
        detail,
    };
    for (i, &k) in keys.iter().enumerate() {
        let r = tree
            .insert(k, k)
            .map_err(|e| fail("insert", i, e.to_string()))?;
        if let Some(stride) = stride {
            if config.variant == Variant::Ff && r.splits > 1 {
                return Err(fail(
                    "one split per insert",
                    i,
                    format!("{} splits", r.splits),
                ));
            }
            if (i + 1) % stride == 0 || i + 1 == keys.len() {
                sweeps += 1;
                if let Some((rule, detail)) = sweep_invariants(&tree) {
                    return Err(fail(rule, i, detail));
                }
            }
        }
        reports.push(r);
    }
    Ok((tree, reports, sweeps))
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ExperimentError> {
    let f = File::create(path).map_err(|source| ExperimentError::Io {
        path: path.into(),
        source,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

const LABEL: [&str; 3] = ["variant", "workload", "n"];

struct Sinks {
    per_height: Option<csv::Writer<BufWriter<File>>>,
    ccdf: Option<csv::Writer<BufWriter<File>>>,
    topk: Option<csv::Writer<BufWriter<File>>>,
    binned_max: Option<csv::Writer<BufWriter<File>>>,
    utilization: Option<csv::Writer<BufWriter<File>>>,
}

impl Sinks {
    fn open(dir: &Path, on: MetricToggles) -> Result<Self, ExperimentError> {
        let open = |enabled: bool, name: &str, header: &[&str]| -> Result<_, ExperimentError> {
            if !enabled {
                return Ok(None);
            }
            let mut w = create(&dir.join(name))?;
            w.write_record(LABEL.iter().chain(header))?;
            Ok(Some(w))
        };
        Ok(Sinks {
            per_height: open(
                on.per_height,
                "per_height.csv",
                &MetricsSummary::PER_HEIGHT_HEADER,
            )?,
            ccdf: open(on.ccdf, "ccdf.csv", &MetricsSummary::CCDF_HEADER)?,
            topk: open(on.topk, "topk.csv", &MetricsSummary::TOP_K_HEADER)?,
            binned_max: open(
                on.binned_max,
                "binned_max.csv",
                &MetricsSummary::BINNED_MAX_HEADER,
            )?,
            utilization: open(
                on.utilization,
                "utilization.csv",
                &MetricsSummary::UTILIZATION_HEADER,
            )?,
        })
    }

    fn write(&mut self, s: &MetricsSummary, prefix: &[String]) -> Result<(), ExperimentError> {
        if let Some(w) = &mut self.per_height {
            s.write_per_height(w, prefix)?;
        }
        if let Some(w) = &mut self.ccdf {
            s.write_ccdf(w, prefix)?;
        }
        if let Some(w) = &mut self.topk {
            s.write_top_k(w, prefix)?;
        }
        if let Some(w) = &mut self.binned_max {
            s.write_binned_max(w, prefix)?;
        }
        if let Some(w) = &mut self.utilization {
            s.write_utilization(w, prefix)?;
        }
        Ok(())
    }

    fn flush(self) -> Result<(), ExperimentError> {
        for w in [
            self.per_height,
            self.ccdf,
            self.topk,
            self.binned_max,
            self.utilization,
        ]
        .into_iter()
        .flatten()
        {
            w.into_inner().map_err(|e| ExperimentError::Io {
                path: "csv".into(),
                source: e.into_error(),
            })?;
        }
        Ok(())
    }
}

const CONCURRENT_HEADER: [&str; 13] = [
    "actors",
    "ops",
    "mean_latency_ns",
    "mean_windowed_range_ns",
    "mean_modeled_us",
    "mean_windowed_range_modeled_us",
    "mean_restarts",
    "max_restarts",
    "max_splits",
    "lost_keys",
    "structural_violations",
    "unsafe_nodes",
    "wall_ms",
];

/// Run the whole matrix and write artifacts into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest, ExperimentError> {
    config.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    std::fs::create_dir_all(&config.out).map_err(|source| ExperimentError::Io {
        path: config.out.clone(),
        source,
    })?;

    let streams: Vec<(String, Vec<Key>)> = match &config.replay {
        Some(path) => {
            let keys = read_keys(path, config.key_format)?;
            let name = path
                .file_name()
                .map_or("replay".into(), |f| f.to_string_lossy().into_owned());
            vec![(format!("replay:{name}"), keys)]
        }
        None => config
            .streams()
            .into_iter()
            .map(|(f, n)| Ok((f.name().to_string(), config.spec(f, n).generate()?)))
            .collect::<Result<_, ExperimentError>>()?,
    };
    if let Some(path) = &config.emit_keys {
        write_keys(path, &streams[0].1, config.key_format)?;
    }

    let mut sinks = Sinks::open(&config.out, config.metrics)?;
    let mut concurrent = if config.actors.is_empty() {
        None
    } else {
        let mut w = create(&config.out.join("concurrent.csv"))?;
        w.write_record(LABEL.iter().chain(CONCURRENT_HEADER.iter()))?;
        Some(w)
    };
    let mut runs = Vec::new();
    for (workload, keys) in &streams {
        for &variant in &config.variants {
            let t0 = Instant::now();
            let cfg = TreeConfig::new(config.capacity, variant);
            let (tree, reports, sweeps) = load_tree(cfg, keys, config.check_invariants, workload)?;
            let summary = MetricsSummary::build(&reports, &tree, config.topk, config.bins)?;
            let prefix = [
                variant.to_string(),
                workload.clone(),
                keys.len().to_string(),
            ];
            sinks.write(&summary, &prefix)?;
            runs.push(RunRecord {
                variant,
                workload: workload.clone(),
                n: keys.len(),
                inserts: reports.len(),
                height: tree.height(),
                max_splits: summary.max_splits,
                max_fluctuation: summary.max_fluctuation,
                pct_below_50_leaf: summary.util.pct_below_50_leaf,
                pct_below_50_internal: summary.util.pct_below_50_internal,
                invariant_sweeps: sweeps,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
            let Some(w) = &mut concurrent else { continue };
            if variant == Variant::Baseline {
                continue;
            }
            for &actors in &config.actors {
                let r = run_concurrent(cfg, keys, actors, config.latency, config.window)?;
                let mut rec: Vec<String> = prefix.to_vec();
                rec.extend([
                    r.actors.to_string(),
                    r.completed.to_string(),
                    format!("{:.1}", r.mean_latency_ns),
                    format!("{:.1}", r.mean_windowed_range_ns),
                    format!("{:.3}", r.mean_modeled_us),
                    format!("{:.3}", r.mean_windowed_range_modeled_us),
                    format!("{:.5}", r.mean_restarts),
                    r.max_restarts.to_string(),
                    r.max_splits.to_string(),
                    r.lost_keys.to_string(),
                    r.structural_violations.to_string(),
                    r.unsafe_nodes.to_string(),
                    format!("{:.1}", r.wall_ms),
                ]);
                w.write_record(&rec)?;
                if r.lost_keys + r.unexpected_keys + r.structural_violations + r.unsafe_nodes > 0 {
                    return Err(ExperimentError::Invariant {
                        rule: "concurrent quiescence".into(),
                        index: r.completed,
                        variant,
                        workload: workload.clone(),
                        n: keys.len(),
                        detail: format!(
                            "{actors} actors: {} lost, {} unexpected, {} violations, {} unsafe",
                            r.lost_keys, r.unexpected_keys, r.structural_violations, r.unsafe_nodes
                        ),
                    });
                }
            }
        }
    }
    sinks.flush()?;
    if let Some(w) = concurrent {
        w.into_inner().map_err(|e| ExperimentError::Io {
            path: "concurrent.csv".into(),
            source: e.into_error(),
        })?;
    }
    let manifest = Manifest {
        config: config.clone(),
        seed: config.seed,
        build_id: BUILD_ID.to_string(),
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
        runs,
    };
    let path = config.out.join("run.json");
    let f = File::create(&path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    Ok(manifest)
}

/// Replay a recorded key file through one variant.
pub fn replay(
    keyfile: &Path,
    format: KeyFormat,
    variant: Variant,
    capacity: usize,
    out: &Path,
) -> Result<Manifest, ExperimentError> {
    run_experiment(&ExperimentConfig {
        variants: vec![variant],
        capacity,
        replay: Some(keyfile.into()),
        key_format: format,
        out: out.into(),
        ..ExperimentConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let cfg = ExperimentConfig {
            variants: vec![Variant::Baseline, Variant::Ff],
            sizes: vec![10, 20],
            check_invariants: Some(7),
            actors: vec![1, 2],
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"capacity": 8, "colour": 1}"#),
            Err(ExperimentError::Config(_))
        ));
        let partial = ExperimentConfig::from_json(r#"{"capacity": 16}"#).unwrap();
        assert_eq!((partial.capacity, partial.bins), (16, 1200));
    }

    #[test]
    fn validation_names_the_problem() {
        let bad = ExperimentConfig {
            capacity: 2,
            ..Default::default()
        };
        assert!(
            matches!(bad.validate(), Err(ExperimentError::Config(m)) if m.contains("capacity"))
        );
        let bad = ExperimentConfig {
            sizes: vec![10, 20],
            emit_keys: Some("k".into()),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn sweeps_run_every_stride_and_catch_corruption() {
        let keys: Vec<Key> = (0..50).collect();
        let (mut tree, reports, sweeps) =
            load_tree(TreeConfig::new(4, Variant::Ff), &keys, Some(10), "seq").unwrap();
        assert_eq!((reports.len(), sweeps), (50, 5));
        assert!(sweep_invariants(&tree).is_none());
        let root = tree.root();
        tree.node_mut_unaccounted(root).unwrap().keys[0] = 1_000;
        assert_eq!(sweep_invariants(&tree).unwrap().0, "structure");
    }

    #[test]
    fn shipped_configs_load_and_validate() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let cfg = ExperimentConfig::load(&path).unwrap();
            cfg.validate()
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
        assert!(seen >= 4);
    }
}
