//! Deterministic key streams.
//!
//! All generators emit unique keys and replay bit-identically for the same
//! spec. Randomness comes from `ChaCha8Rng`, whose output is stable across
//! platforms and crate versions.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::TreeError;
use crate::node::{Key, NodeId};
use crate::tree::{Tree, Variant};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("key space {key_space} smaller than n = {n}")]
    KeySpace { key_space: u64, n: usize },
    #[error("bad parameter: {0}")]
    Param(String),
    #[error("key space exhausted: {0}")]
    Exhausted(String),
    #[error("keyfile line {line}: {msg}")]
    TextParse { line: usize, msg: String },
    #[error("keyfile offset {offset}: {msg}")]
    BinaryParse { offset: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T> = std::result::Result<T, WorkloadError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Family {
    Sequential,
    Uniform,
    Zipfian,
    ClrsAdversary,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Sequential => "sequential",
            Family::Uniform => "uniform",
            Family::Zipfian => "zipfian",
            Family::ClrsAdversary => "clrs_adversary",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

pub const DEFAULT_KEY_SPACE: u64 = 1 << 40;
pub const DEFAULT_THETA: f64 = 0.99;
pub const DEFAULT_REGIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_key_space")]
    pub key_space: u64,
    /// Node capacity of the adversary's shadow tree.
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}
fn default_key_space() -> u64 {
    DEFAULT_KEY_SPACE
}
fn default_capacity() -> usize {
    8
}

impl WorkloadSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        WorkloadSpec {
            family,
            n,
            seed,
            direction: Direction::Asc,
            theta: DEFAULT_THETA,
            key_space: DEFAULT_KEY_SPACE,
            capacity: 8,
        }
    }

    pub fn generate(&self) -> Result<Vec<Key>> {
        match self.family {
            Family::Sequential => Ok(gen_sequential(self.n, self.direction)),
            Family::Uniform => gen_uniform(self.n, self.seed, self.key_space),
            Family::Zipfian => gen_zipfian(self.n, self.seed, self.theta, self.key_space),
            Family::ClrsAdversary => {
                let cfg = AdversaryConfig {
                    capacity: self.capacity,
                    seed: self.seed,
                    key_space: self.key_space,
                };
                Ok(gen_clrs_adversary(self.n, &cfg)?.keys)
            }
        }
    }
}

pub fn gen_sequential(n: usize, direction: Direction) -> Vec<Key> {
    let up = 0..n as Key;
    match direction {
        Direction::Asc => up.collect(),
        Direction::Desc => up.rev().collect(),
    }
}

pub fn gen_uniform(n: usize, seed: u64, key_space: u64) -> Result<Vec<Key>> {
    if key_space < n as u64 {
        return Err(WorkloadError::KeySpace { key_space, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = usize::try_from(key_space)
        .map_err(|_| WorkloadError::Param("key space exceeds usize".into()))?;
    Ok(rand::seq::index::sample(&mut rng, len, n)
        .into_iter()
        .map(|i| i as Key)
        .collect())
}

/// Skewed inserts over `DEFAULT_REGIONS` equal regions of the key space.
///
/// Region ranks follow Zipf(theta); rank order is shuffled over the key space
/// so hot regions are not adjacent. Within a region the i-th draw gets
/// sequence number i, scrambled by a bijection so the region fills in a
/// scattered order rather than ascending.
pub fn gen_zipfian(n: usize, seed: u64, theta: f64, key_space: u64) -> Result<Vec<Key>> {
    gen_zipfian_regions(n, seed, theta, key_space, DEFAULT_REGIONS)
}

pub fn gen_zipfian_regions(
    n: usize,
    seed: u64,
    theta: f64,
    key_space: u64,
    regions: u64,
) -> Result<Vec<Key>> {
    if !(theta > 0.0 && theta < 2.0) {
        return Err(WorkloadError::Param(format!(
            "theta must be in (0, 2), got {theta}"
        )));
    }
    if key_space < n as u64 {
        return Err(WorkloadError::KeySpace { key_space, n });
    }
    if regions == 0 || key_space / regions < 2 {
        return Err(WorkloadError::Param(format!(
            "{regions} regions do not fit the key space"
        )));
    }
    let bits = 63 - (key_space / regions).leading_zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(regions as f64, theta).map_err(|e| WorkloadError::Param(e.to_string()))?;
    let mut placement: Vec<u64> = (0..regions).collect();
    rand::seq::SliceRandom::shuffle(placement.as_mut_slice(), &mut rng);
    let mut next_seq = vec![0u64; regions as usize];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = zipf.sample(&mut rng) as u64 - 1;
        let seq = next_seq[rank as usize];
        if seq >> bits != 0 {
            return Err(WorkloadError::Exhausted(format!(
                "region of rank {rank} is full"
            )));
        }
        next_seq[rank as usize] += 1;
        let region = placement[rank as usize];
        out.push((region << bits) | scramble(seq, bits));
    }
    Ok(out)
}

/// A bijection on `[0, 2^bits)`.
fn scramble(x: u64, bits: u32) -> u64 {
    let mask = if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    };
    let mut v = x & mask;
    for _ in 0..2 {
        v = v.wrapping_mul(0x9E37_79B9_7F4A_7C15) & mask;
        v ^= v >> (bits / 2).max(1);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub capacity: usize,
    pub seed: u64,
    pub key_space: u64,
}

impl AdversaryConfig {
    pub fn new(capacity: usize, seed: u64) -> Self {
        AdversaryConfig {
            capacity,
            seed,
            key_space: DEFAULT_KEY_SPACE,
        }
    }
}

/// Adaptive key source that keeps setting traps for a top-down splitting tree.
///
/// It keeps a shadow tree of that kind and a target key. Each step finds the
/// bottommost non-full node on the target's path. If that is the leaf, the
/// next key goes into the leaf; otherwise it goes into a sibling subtree of
/// the path, which eventually splits a child of that node and adds a key to
/// it. Nodes below the chosen one are full and never touched. Once the whole
/// path is full the target key itself is emitted, and the shadow tree has to
/// split every node on it.
#[derive(Debug, Clone)]
pub struct ClrsAdversary {
    shadow: Tree,
    rng: ChaCha8Rng,
    used: HashSet<Key>,
    key_space: u64,
    target: Option<Key>,
}

/// One emitted key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdversaryStep {
    pub key: Key,
    /// The key completed a trap.
    pub trap: bool,
    pub splits: u32,
    pub total: u64,
    pub height: u32,
}

impl ClrsAdversary {
    pub fn new(cfg: &AdversaryConfig) -> Result<Self> {
        if cfg.key_space < 16 {
            return Err(WorkloadError::Param("key space too small".into()));
        }
        Ok(ClrsAdversary {
            shadow: Tree::with_capacity(cfg.capacity, Variant::Clrs)?,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            used: HashSet::new(),
            key_space: cfg.key_space,
            target: None,
        })
    }

    pub fn shadow(&self) -> &Tree {
        &self.shadow
    }

    fn fresh_in(&mut self, lo: Key, hi: Key) -> Result<Key> {
        let avoid = self.target;
        for _ in 0..256 {
            if hi <= lo {
                break;
            }
            let k = self.rng.random_range(lo..hi);
            if !self.used.contains(&k) && Some(k) != avoid {
                return Ok(k);
            }
        }
        Err(WorkloadError::Exhausted(format!(
            "no fresh key in [{lo}, {hi})"
        )))
    }

    /// Path to `key` as (node, lower bound, upper bound).
    fn path_to(&self, key: Key) -> Vec<(NodeId, Key, Key)> {
        let mut out = Vec::new();
        let (mut cur, mut lo, mut hi) = (self.shadow.root(), 0, self.key_space);
        loop {
            out.push((cur, lo, hi));
            let n = self.shadow.node(cur).expect("shadow node");
            if n.is_leaf() {
                return out;
            }
            let i = n.route(key);
            if i > 0 {
                lo = n.keys[i - 1];
            }
            if i < n.keys.len() {
                hi = n.keys[i];
            }
            cur = n.children[i];
        }
    }

    pub fn next_step(&mut self) -> Result<AdversaryStep> {
        let target = match self.target {
            Some(t) => t,
            None => {
                let t = self.fresh_in(0, self.key_space)?;
                self.target = Some(t);
                t
            }
        };
        let cap = self.shadow.capacity();
        let path = self.path_to(target);
        let open = path
            .iter()
            .rposition(|(id, _, _)| !self.shadow.node(*id).expect("node").is_full(cap));
        let (key, trap) = match open {
            None => {
                self.target = None;
                (target, true)
            }
            Some(d) => {
                let (id, lo, hi) = path[d];
                let n = self.shadow.node(id).expect("node");
                if n.is_leaf() {
                    (self.fresh_in(lo, hi)?, false)
                } else {
                    let i = n.route(target);
                    let j = if i + 1 < n.children.len() {
                        i + 1
                    } else {
                        i - 1
                    };
                    let clo = if j == 0 { lo } else { n.keys[j - 1] };
                    let chi = if j == n.keys.len() { hi } else { n.keys[j] };
                    (self.fresh_in(clo, chi)?, false)
                }
            }
        };
        self.used.insert(key);
        let r = self.shadow.insert(key, key)?;
        Ok(AdversaryStep {
            key,
            trap,
            splits: r.splits,
            total: r.total,
            height: r.height,
        })
    }
}

/// A recorded adversary run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversaryStream {
    pub keys: Vec<Key>,
    /// Indices of keys that completed a trap.
    pub traps: Vec<usize>,
    pub steps: Vec<AdversaryStep>,
}

/// Run the adversary for at least `n` keys, stopping on the first trap
/// completed at or after that point, so the last key is always a trap.
pub fn gen_clrs_adversary(n: usize, cfg: &AdversaryConfig) -> Result<AdversaryStream> {
    let mut adv = ClrsAdversary::new(cfg)?;
    let mut out = AdversaryStream::default();
    while out.keys.len() < n || out.traps.last() != Some(&(out.keys.len() - 1)) {
        let step = adv.next_step()?;
        if step.trap {
            out.traps.push(out.keys.len());
        }
        out.keys.push(step.key);
        out.steps.push(step);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KeyFormat {
    /// One decimal key per line.
    #[default]
    Text,
    /// 8-byte little-endian records.
    Binary,
}

pub fn write_keys(path: &Path, keys: &[Key], format: KeyFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for k in keys {
        match format {
            KeyFormat::Text => writeln!(w, "{k}")?,
            KeyFormat::Binary => w.write_all(&k.to_le_bytes())?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_keys(path: &Path, format: KeyFormat) -> Result<Vec<Key>> {
    let file = File::open(path)?;
    match format {
        KeyFormat::Text => parse_text_keys(BufReader::new(file)),
        KeyFormat::Binary => parse_binary_keys(BufReader::new(file)),
    }
}

pub fn parse_text_keys<R: BufRead>(r: R) -> Result<Vec<Key>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let k = t.parse::<Key>().map_err(|e| WorkloadError::TextParse {
            line: i + 1,
            msg: format!("`{t}`: {e}"),
        })?;
        out.push(k);
    }
    Ok(out)
}

pub fn parse_binary_keys<R: Read>(mut r: R) -> Result<Vec<Key>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(WorkloadError::BinaryParse {
            offset: (bytes.len() - bytes.len() % 8) as u64,
            msg: format!("trailing {} bytes", bytes.len() % 8),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| Key::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unique(keys: &[Key]) -> bool {
        keys.iter().collect::<HashSet<_>>().len() == keys.len()
    }

    #[test]
    fn sequential_both_ways() {
        assert_eq!(gen_sequential(3, Direction::Asc), vec![0, 1, 2]);
        assert_eq!(gen_sequential(3, Direction::Desc), vec![2, 1, 0]);
    }

    #[test]
    fn uniform_is_deterministic_and_unique() {
        assert!(gen_uniform(0, 1, 100).unwrap().is_empty());
        let a = gen_uniform(5000, 7, 1 << 40).unwrap();
        assert_eq!(a, gen_uniform(5000, 7, 1 << 40).unwrap());
        assert_ne!(a, gen_uniform(5000, 8, 1 << 40).unwrap());
        assert!(unique(&a));
        assert!(a.iter().all(|k| *k < 1 << 40));
        assert!(matches!(
            gen_uniform(10, 1, 5),
            Err(WorkloadError::KeySpace { .. })
        ));
        let mut dense = gen_uniform(100, 3, 100).unwrap();
        dense.sort_unstable();
        assert_eq!(dense, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_chi_square() {
        // 16 equal buckets, 15 degrees of freedom; 37.7 is the 0.1% critical value
        let keys = gen_uniform(10_000, 42, 1 << 40).unwrap();
        let mut counts = [0f64; 16];
        for k in keys {
            counts[(k >> 36) as usize] += 1.0;
        }
        let expect = 10_000.0 / 16.0;
        let chi: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        assert!(chi < 37.7, "chi-square {chi}");
    }

    #[test]
    fn zipfian_is_deterministic_unique_and_skewed() {
        let a = gen_zipfian(100_000, 3, 0.99, 1 << 40).unwrap();
        assert_eq!(a, gen_zipfian(100_000, 3, 0.99, 1 << 40).unwrap());
        assert!(unique(&a));
        let bits = 63 - ((1u64 << 40) / DEFAULT_REGIONS).leading_zeros();
        let mut per_region = std::collections::HashMap::<u64, usize>::new();
        for k in &a {
            *per_region.entry(k >> bits).or_default() += 1;
        }
        let mut counts: Vec<usize> = per_region.into_values().collect();
        counts.sort_unstable_by(|x, y| y.cmp(x));
        let top: usize = counts.iter().take((DEFAULT_REGIONS / 100) as usize).sum();
        // the Zipf CDF at rank 100 of 10^4 with theta 0.99 is about 0.53
        let cdf = zipf_cdf(100, DEFAULT_REGIONS, 0.99);
        assert!(cdf > 0.5);
        let share = top as f64 / a.len() as f64;
        assert!(
            share > 0.5 && (share - cdf).abs() < 0.03,
            "share {share}, cdf {cdf}"
        );
    }

    fn zipf_cdf(k: u64, n: u64, theta: f64) -> f64 {
        let h = |m: u64| (1..=m).map(|i| (i as f64).powf(-theta)).sum::<f64>();
        h(k) / h(n)
    }

    #[test]
    fn zipfian_low_skew_spreads_out() {
        let a = gen_zipfian(20_000, 1, 0.01, 1 << 40).unwrap();
        let bits = 63 - ((1u64 << 40) / DEFAULT_REGIONS).leading_zeros();
        let regions: HashSet<u64> = a.iter().map(|k| k >> bits).collect();
        // near-uniform region choice touches most of the 10^4 regions
        assert!(regions.len() > 8000, "{}", regions.len());
        assert!(gen_zipfian(10, 1, 0.0, 1 << 40).is_err());
    }

    #[test]
    fn scramble_is_a_bijection() {
        for bits in [1, 4, 10] {
            let img: HashSet<u64> = (0..1u64 << bits).map(|x| scramble(x, bits)).collect();
            assert_eq!(img.len(), 1 << bits);
        }
    }

    #[test]
    fn adversary_trap_at_c3_height_2() {
        let mut adv = ClrsAdversary::new(&AdversaryConfig::new(3, 1)).unwrap();
        let mut seen = Vec::new();
        loop {
            let s = adv.next_step().unwrap();
            seen.push(s.key);
            if s.trap && s.height == 2 {
                assert_eq!(s.splits, 2);
                assert_eq!(s.total, 3 * 2 + 1);
                break;
            }
        }
        assert!(unique(&seen));
    }

    #[test]
    fn adversary_traps_cost_3h_plus_1() {
        let stream = gen_clrs_adversary(3000, &AdversaryConfig::new(8, 5)).unwrap();
        assert!(stream.keys.len() >= 3000);
        assert_eq!(*stream.traps.last().unwrap(), stream.keys.len() - 1);
        for &i in &stream.traps {
            let s = stream.steps[i];
            assert_eq!(s.splits, s.height);
            assert_eq!(s.total, 3 * s.height as u64 + 1);
        }
        assert!(unique(&stream.keys));
        let again = gen_clrs_adversary(3000, &AdversaryConfig::new(8, 5)).unwrap();
        assert_eq!(again.keys, stream.keys);
    }

    #[test]
    fn keyfile_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let keys = vec![0, 7, u64::MAX, 42];
        for fmt in [KeyFormat::Text, KeyFormat::Binary] {
            let p = dir.path().join("k");
            write_keys(&p, &keys, fmt).unwrap();
            assert_eq!(read_keys(&p, fmt).unwrap(), keys);
        }
        let err = parse_text_keys("1\n2\nx3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::TextParse { line: 3, .. }));
        let err = parse_binary_keys(&[0u8; 11][..]).unwrap_err();
        assert!(matches!(err, WorkloadError::BinaryParse { offset: 8, .. }));
    }
}
