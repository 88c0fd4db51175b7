//! Statistics over insert cost streams and finished trees.
//!
//! Everything here is a pure function of collected data. Percentiles use
//! the nearest-rank method so results are exact and reproducible.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{InsertReport, Tree};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("insert cost {total} below the floor at height {height}")]
    BelowFloor { total: u64, height: u32 },
    #[error("empty input")]
    Empty,
    #[error("parameter out of range: {0}")]
    Param(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Extra I/O above the best case of `height + 1`.
pub fn fluctuation_of(report: &InsertReport) -> Result<u64, MetricsError> {
    let floor = u64::from(report.height) + 1;
    report
        .total
        .checked_sub(floor)
        .ok_or(MetricsError::BelowFloor {
            total: report.total,
            height: report.height,
        })
}

/// Nearest-rank percentile of sorted data: the value at rank ceil(p * n).
pub fn nearest_rank(sorted: &[u64], p: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightStats {
    pub count: u64,
    pub min: u64,
    pub max: u64,
    pub p50: u64,
    pub p95: u64,
}

impl HeightStats {
    pub fn range(&self) -> u64 {
        self.max - self.min
    }
}

/// Total I/O statistics grouped by the height each insert started at.
pub fn per_height_stats(reports: &[InsertReport]) -> BTreeMap<u32, HeightStats> {
    let mut groups: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.height).or_default().push(r.total);
    }
    groups
        .into_iter()
        .map(|(h, mut v)| {
            v.sort_unstable();
            let stats = HeightStats {
                count: v.len() as u64,
                min: v[0],
                max: v[v.len() - 1],
                p50: nearest_rank(&v, 0.50).expect("non-empty"),
                p95: nearest_rank(&v, 0.95).expect("non-empty"),
            };
            (h, stats)
        })
        .collect()
}

/// `(x, P(X >= x))` for each distinct value, ascending.
pub fn ccdf(values: &[u64]) -> Vec<(u64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        out.push((x, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Peak {
    pub value: u64,
    pub index: usize,
}

/// The `k` largest values, descending; equal values keep input order.
pub fn top_k(values: &[u64], k: usize) -> Vec<Peak> {
    let mut peaks: Vec<Peak> = values
        .iter()
        .enumerate()
        .map(|(index, &value)| Peak { value, index })
        .collect();
    peaks.sort_by(|a, b| b.value.cmp(&a.value).then(a.index.cmp(&b.index)));
    peaks.truncate(k);
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub bin: usize,
    /// First index in the bin.
    pub start: usize,
    /// One past the last index.
    pub end: usize,
    pub max: u64,
}

/// Split the stream into `bins` contiguous windows and take each maximum.
/// Bin `i` covers `[i*n/bins, (i+1)*n/bins)`, so sizes differ by at most
/// one and are equal when `bins` divides `n`. Empty bins are dropped.
pub fn binned_max(values: &[u64], bins: usize) -> Result<Vec<Bin>, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::Param("bins must be at least 1".into()));
    }
    let n = values.len();
    Ok((0..bins)
        .filter_map(|i| {
            let (start, end) = (i * n / bins, (i + 1) * n / bins);
            let max = values[start..end].iter().copied().max()?;
            Some(Bin {
                bin: i,
                start,
                end,
                max,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedRange {
    pub ranges: Vec<u64>,
    pub mean: f64,
}

/// `max - min` over non-overlapping windows. A trailing partial window is
/// kept only when there is no full one.
pub fn windowed_range(values: &[u64], window: usize) -> Result<WindowedRange, MetricsError> {
    if window == 0 {
        return Err(MetricsError::Param("window must be at least 1".into()));
    }
    let mut ranges: Vec<u64> = values
        .chunks_exact(window)
        .map(|w| w.iter().max().unwrap() - w.iter().min().unwrap())
        .collect();
    if ranges.is_empty() && !values.is_empty() {
        ranges.push(values.iter().max().unwrap() - values.iter().min().unwrap());
    }
    let mean = if ranges.is_empty() {
        0.0
    } else {
        ranges.iter().sum::<u64>() as f64 / ranges.len() as f64
    };
    Ok(WindowedRange { ranges, mean })
}

pub const UTIL_BUCKETS: usize = 10;

/// Node occupancy in tenths. A leaf holds `keys / C`; an internal node
/// holds `children / (C + 1)`, so a routing node with a single child still
/// counts as occupied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub leaf_histogram: [u64; UTIL_BUCKETS],
    pub internal_histogram: [u64; UTIL_BUCKETS],
    pub leaf_nodes: u64,
    pub internal_nodes: u64,
    /// Percent of nodes whose occupancy is below one half.
    pub pct_below_50_leaf: f64,
    pub pct_below_50_internal: f64,
    pub min_fraction: f64,
}

pub fn utilization(tree: &Tree) -> Utilization {
    let cap = tree.capacity();
    let mut u = Utilization {
        min_fraction: 1.0,
        ..Default::default()
    };
    let (mut low_leaf, mut low_internal) = (0u64, 0u64);
    for (id, _) in tree.nodes() {
        let n = tree.node(id).expect("reachable node");
        let frac = if n.is_leaf() {
            n.len() as f64 / cap as f64
        } else {
            n.children.len() as f64 / (cap + 1) as f64
        };
        if id != tree.root() {
            u.min_fraction = u.min_fraction.min(frac);
        }
        let bucket = ((frac * UTIL_BUCKETS as f64) as usize).min(UTIL_BUCKETS - 1);
        let low = u64::from(frac < 0.5);
        if n.is_leaf() {
            u.leaf_histogram[bucket] += 1;
            u.leaf_nodes += 1;
            low_leaf += low;
        } else {
            u.internal_histogram[bucket] += 1;
            u.internal_nodes += 1;
            low_internal += low;
        }
    }
    let pct = |low: u64, total: u64| {
        if total == 0 {
            0.0
        } else {
            100.0 * low as f64 / total as f64
        }
    };
    u.pct_below_50_leaf = pct(low_leaf, u.leaf_nodes);
    u.pct_below_50_internal = pct(low_internal, u.internal_nodes);
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub per_height: BTreeMap<u32, HeightStats>,
    pub fluct_ccdf: Vec<(u64, f64)>,
    pub top_k: Vec<Peak>,
    pub binned_max: Vec<Bin>,
    pub util: Utilization,
    pub max_splits: u32,
    pub max_fluctuation: u64,
    pub inserts: u64,
}

impl MetricsSummary {
    pub fn build(
        reports: &[InsertReport],
        tree: &Tree,
        k: usize,
        bins: usize,
    ) -> Result<Self, MetricsError> {
        if reports.is_empty() {
            return Err(MetricsError::Empty);
        }
        let totals: Vec<u64> = reports.iter().map(|r| r.total).collect();
        let fluct = reports
            .iter()
            .map(fluctuation_of)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MetricsSummary {
            per_height: per_height_stats(reports),
            max_fluctuation: *fluct.iter().max().expect("non-empty"),
            fluct_ccdf: ccdf(&fluct),
            top_k: top_k(&totals, k),
            binned_max: binned_max(&totals, bins)?,
            util: utilization(tree),
            max_splits: reports.iter().map(|r| r.splits).max().unwrap_or(0),
            inserts: reports.len() as u64,
        })
    }

    pub const PER_HEIGHT_HEADER: [&'static str; 6] =
        ["height", "count", "min", "max", "p50", "p95"];
    pub const CCDF_HEADER: [&'static str; 2] = ["fluctuation", "p_at_least"];
    pub const TOP_K_HEADER: [&'static str; 3] = ["rank", "insert_index", "total_io"];
    pub const BINNED_MAX_HEADER: [&'static str; 4] = ["bin", "start", "end", "max_total_io"];
    pub const UTILIZATION_HEADER: [&'static str; 4] = ["class", "bucket_lo", "bucket_hi", "nodes"];

    /// Rows are written after the `prefix` columns, which label the run.
    pub fn write_per_height<W: Write>(
        &self,
        out: &mut csv::Writer<W>,
        prefix: &[String],
    ) -> Result<(), MetricsError> {
        for (h, s) in &self.per_height {
            row(
                out,
                prefix,
                [
                    h.to_string(),
                    s.count.to_string(),
                    s.min.to_string(),
                    s.max.to_string(),
                    s.p50.to_string(),
                    s.p95.to_string(),
                ],
            )?;
        }
        Ok(())
    }

    pub fn write_ccdf<W: Write>(
        &self,
        out: &mut csv::Writer<W>,
        prefix: &[String],
    ) -> Result<(), MetricsError> {
        for (x, p) in &self.fluct_ccdf {
            row(out, prefix, [x.to_string(), p.to_string()])?;
        }
        Ok(())
    }

    pub fn write_top_k<W: Write>(
        &self,
        out: &mut csv::Writer<W>,
        prefix: &[String],
    ) -> Result<(), MetricsError> {
        for (rank, p) in self.top_k.iter().enumerate() {
            row(
                out,
                prefix,
                [
                    (rank + 1).to_string(),
                    p.index.to_string(),
                    p.value.to_string(),
                ],
            )?;
        }
        Ok(())
    }

    pub fn write_binned_max<W: Write>(
        &self,
        out: &mut csv::Writer<W>,
        prefix: &[String],
    ) -> Result<(), MetricsError> {
        for b in &self.binned_max {
            row(
                out,
                prefix,
                [
                    b.bin.to_string(),
                    b.start.to_string(),
                    b.end.to_string(),
                    b.max.to_string(),
                ],
            )?;
        }
        Ok(())
    }

    pub fn write_utilization<W: Write>(
        &self,
        out: &mut csv::Writer<W>,
        prefix: &[String],
    ) -> Result<(), MetricsError> {
        let step = 1.0 / UTIL_BUCKETS as f64;
        for (class, hist) in [
            ("leaf", &self.util.leaf_histogram),
            ("internal", &self.util.internal_histogram),
        ] {
            for (i, count) in hist.iter().enumerate() {
                let lo = i as f64 * step;
                row(
                    out,
                    prefix,
                    [
                        class.to_string(),
                        format!("{lo:.1}"),
                        format!("{:.1}", lo + step),
                        count.to_string(),
                    ],
                )?;
            }
        }
        Ok(())
    }
}

fn row<W: Write, const N: usize>(
    out: &mut csv::Writer<W>,
    prefix: &[String],
    fields: [String; N],
) -> Result<(), MetricsError> {
    out.write_record(prefix.iter().chain(fields.iter()))?;
    Ok(())
}
