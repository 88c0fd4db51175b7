//! Optimistic lock coupling over the CLRS and ff insert algorithms.
//!
//! Every node lives in a slot with a version counter; an odd version means a
//! writer holds it. An insert runs in two phases. The read phase descends
//! without locks, copying each node it touches together with the version it
//! saw, and runs the ordinary insert algorithm on those private copies. The
//! write phase locks the nodes the copy run dirtied (meta first, then by
//! level from the top, then by id), checks that every recorded version is
//! unchanged, installs the new contents and bumps the versions. Any mismatch
//! releases the locks and restarts the operation from scratch.
//!
//! Injected latencies model a slow device: a read costs `read_us` on the
//! first access of a node in an attempt, and each dirty node costs
//! `write_us` while the write locks are held.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::clrs_insert;
use crate::error::{Result as TreeResult, TreeError};
use crate::ff::ff_insert;
use crate::metrics::windowed_range;
use crate::node::{Key, Node, NodeId, NodeKind, Payload};
use crate::store::{Applied, NodeStore};
use crate::tree::{Tree, TreeConfig, Variant};

#[derive(Debug, Error)]
pub enum OlcError {
    #[error("variant {0} has no concurrent form")]
    Variant(Variant),
    #[error("bad parameter: {0}")]
    Param(String),
    #[error("insert of key {key} failed: {source}")]
    Insert { key: Key, source: TreeError },
    #[error("actor thread panicked")]
    ActorPanic,
}

/// Injected device latencies in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub read_us: u64,
    pub write_us: u64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            read_us: 1,
            write_us: 2,
        }
    }
}

impl LatencyConfig {
    pub const NONE: LatencyConfig = LatencyConfig {
        read_us: 0,
        write_us: 0,
    };
}

/// Wait out `us` microseconds, yielding so other actors can run.
fn inject(us: u64) {
    if us == 0 {
        return;
    }
    let until = Instant::now() + Duration::from_micros(us);
    while Instant::now() < until {
        std::thread::yield_now();
    }
}

/// A value guarded by a version counter. Even: free. Odd: write-locked.
#[derive(Debug)]
struct Versioned<T> {
    version: AtomicU64,
    value: RwLock<T>,
}

impl<T: Clone> Versioned<T> {
    fn new(value: T) -> Self {
        Versioned {
            version: AtomicU64::new(0),
            value: RwLock::new(value),
        }
    }

    fn version(&self) -> u64 {
        self.version.load(Ordering::Acquire)
    }

    /// A consistent copy and the version it belongs to. Waits out writers.
    fn snapshot(&self) -> (u64, T) {
        loop {
            let v = self.version();
            if v % 2 == 1 {
                std::thread::yield_now();
                continue;
            }
            let copy = self.value.read().clone();
            if self.version() == v {
                return (v, copy);
            }
        }
    }

    fn try_lock(&self, observed: u64) -> bool {
        self.version
            .compare_exchange(observed, observed + 1, Ordering::AcqRel, Ordering::Relaxed)
            .is_ok()
    }

    fn unlock(&self, observed: u64, changed: bool) {
        let next = if changed { observed + 2 } else { observed };
        self.version.store(next, Ordering::Release);
    }
}

/// Which latch a recorded version belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Latch {
    /// Root pointer and height.
    Meta,
    Node(NodeId),
}

/// A version observed during the read phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VersionedAccess {
    pub latch: Latch,
    pub observed_version: u64,
    /// Position in the descent, root first. Orders lock acquisition.
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Meta {
    root: NodeId,
    height: usize,
}

/// Shared tree for concurrent inserts.
#[derive(Debug)]
pub struct ConcurrentTree {
    config: TreeConfig,
    latency: LatencyConfig,
    meta: Versioned<Meta>,
    slots: RwLock<Vec<Arc<Versioned<Node>>>>,
    len: AtomicUsize,
    commits: AtomicU64,
}

/// Per-actor scratch: node ids reserved by aborted attempts, kept for reuse.
#[derive(Debug, Default)]
pub struct ActorState {
    spare: Vec<NodeId>,
}

/// What one committed insert cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpStats {
    pub restarts: u32,
    pub splits: u32,
    /// Reads and writes of the committed attempt.
    pub reads: u64,
    pub writes: u64,
    /// Injected latency summed over all attempts, in microseconds.
    pub modeled_us: u64,
    /// Wall-clock time from the first attempt to the commit.
    pub wall_ns: u64,
    /// Global commit order.
    pub commit_seq: u64,
}

impl ConcurrentTree {
    pub fn new(config: TreeConfig, latency: LatencyConfig) -> Result<Self, OlcError> {
        if config.variant == Variant::Baseline {
            return Err(OlcError::Variant(config.variant));
        }
        config
            .validate()
            .map_err(|e| OlcError::Param(e.to_string()))?;
        Ok(ConcurrentTree {
            config,
            latency,
            meta: Versioned::new(Meta {
                root: NodeId(0),
                height: 1,
            }),
            slots: RwLock::new(vec![Arc::new(Versioned::new(Node::new(NodeKind::Leaf)))]),
            len: AtomicUsize::new(0),
            commits: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> TreeConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.len.load(Ordering::Acquire)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slot(&self, id: NodeId) -> TreeResult<Arc<Versioned<Node>>> {
        self.slots
            .read()
            .get(id.index())
            .cloned()
            .ok_or(TreeError::UnknownNode(id))
    }

    fn reserve(&self, actor: &mut ActorState) -> TreeResult<NodeId> {
        if let Some(id) = actor.spare.pop() {
            return Ok(id);
        }
        let mut slots = self.slots.write();
        let id = NodeId(
            u32::try_from(slots.len())
                .map_err(|_| TreeError::Structural("node id space exhausted".into()))?,
        );
        slots.push(Arc::new(Versioned::new(Node::new(NodeKind::Leaf))));
        Ok(id)
    }

    /// Insert with restarts until one attempt commits.
    pub fn insert(
        &self,
        key: Key,
        payload: Payload,
        actor: &mut ActorState,
    ) -> TreeResult<OpStats> {
        let start = Instant::now();
        let mut stats = OpStats::default();
        loop {
            let mut store = OptimisticStore::new(self, actor);
            let run = match self.config.variant {
                Variant::Clrs => clrs_insert(&mut store, key, payload),
                Variant::Ff => ff_insert(&mut store, key, payload),
                Variant::Baseline => unreachable!("rejected at construction"),
            };
            stats.modeled_us += store.reads * self.latency.read_us;
            let applied = match run {
                Ok(a) => a,
                // a torn view across nodes can trip the algorithm; only a
                // view that still validates makes the error real
                Err(e) => {
                    let valid = store.validate_all();
                    store.abandon();
                    if valid {
                        return Err(e);
                    }
                    stats.restarts += 1;
                    continue;
                }
            };
            match store.commit(applied)? {
                Some((reads, writes, seq)) => {
                    stats.splits = applied.splits;
                    stats.reads = reads;
                    stats.writes = writes;
                    stats.modeled_us += writes * self.latency.write_us;
                    stats.commit_seq = seq;
                    stats.wall_ns = start.elapsed().as_nanos() as u64;
                    return Ok(stats);
                }
                None => stats.restarts += 1,
            }
        }
    }

    /// Optimistic point lookup.
    pub fn lookup(&self, key: Key) -> TreeResult<Option<Payload>> {
        'restart: loop {
            let (mv, meta) = self.meta.snapshot();
            let mut seen = vec![];
            let mut cur = meta.root;
            loop {
                let slot = self.slot(cur)?;
                let (v, node) = slot.snapshot();
                seen.push((slot, v));
                if node.is_leaf() {
                    let found = node.search(key).ok().map(|i| node.values[i]);
                    if self.meta.version() != mv || seen.iter().any(|(s, v)| s.version() != *v) {
                        continue 'restart;
                    }
                    return Ok(found);
                }
                cur = node.find_next_node(key);
            }
        }
    }

    /// Copy the shared state into a plain tree. Call after all actors quiesce.
    pub fn to_tree(&self) -> Tree {
        let meta = *self.meta.value.read();
        let nodes = self
            .slots
            .read()
            .iter()
            .map(|s| s.value.read().clone())
            .collect();
        Tree::from_parts(self.config, nodes, meta.root, meta.height, self.len())
    }
}

#[derive(Debug)]
struct Entry {
    id: NodeId,
    node: Node,
    version: u64,
    level: usize,
    dirty: bool,
    fresh: bool,
}

/// Private copies of everything one attempt touched.
struct OptimisticStore<'a> {
    tree: &'a ConcurrentTree,
    actor: &'a mut ActorState,
    meta: Option<(u64, Meta, bool)>,
    entries: Vec<Entry>,
    levels: usize,
    reads: u64,
}

impl<'a> OptimisticStore<'a> {
    fn new(tree: &'a ConcurrentTree, actor: &'a mut ActorState) -> Self {
        OptimisticStore {
            tree,
            actor,
            meta: None,
            entries: Vec::new(),
            levels: 0,
            reads: 0,
        }
    }

    fn meta(&mut self) -> &mut (u64, Meta, bool) {
        let tree = self.tree;
        self.meta.get_or_insert_with(|| {
            let (v, m) = tree.meta.snapshot();
            (v, m, false)
        })
    }

    fn position(&mut self, id: NodeId) -> TreeResult<usize> {
        if let Some(i) = self.entries.iter().position(|e| e.id == id) {
            return Ok(i);
        }
        let (version, node) = self.tree.slot(id)?.snapshot();
        inject(self.tree.latency.read_us);
        self.reads += 1;
        self.entries.push(Entry {
            id,
            node,
            version,
            level: self.levels,
            dirty: false,
            fresh: false,
        });
        self.levels += 1;
        Ok(self.entries.len() - 1)
    }

    fn accesses(&self) -> Vec<VersionedAccess> {
        let meta = self.meta.iter().map(|(v, _, _)| VersionedAccess {
            latch: Latch::Meta,
            observed_version: *v,
            level: 0,
        });
        let nodes = self
            .entries
            .iter()
            .filter(|e| !e.fresh)
            .map(|e| VersionedAccess {
                latch: Latch::Node(e.id),
                observed_version: e.version,
                level: e.level + 1,
            });
        meta.chain(nodes).collect()
    }

    fn current(&self, latch: Latch) -> u64 {
        match latch {
            Latch::Meta => self.tree.meta.version(),
            Latch::Node(id) => self.tree.slot(id).expect("recorded node").version(),
        }
    }

    fn validate_all(&self) -> bool {
        self.accesses()
            .iter()
            .all(|a| self.current(a.latch) == a.observed_version)
    }

    /// Give reserved ids back to the actor for the next attempt.
    fn abandon(self) {
        self.actor
            .spare
            .extend(self.entries.iter().filter(|e| e.fresh).map(|e| e.id));
    }

    fn lock(&self, latch: Latch, observed: u64) -> bool {
        match latch {
            Latch::Meta => self.tree.meta.try_lock(observed),
            Latch::Node(id) => self
                .tree
                .slot(id)
                .expect("recorded node")
                .try_lock(observed),
        }
    }

    fn unlock(&self, latch: Latch, observed: u64, changed: bool) {
        match latch {
            Latch::Meta => self.tree.meta.unlock(observed, changed),
            Latch::Node(id) => self
                .tree
                .slot(id)
                .expect("recorded node")
                .unlock(observed, changed),
        }
    }

    /// Write phase. `Some((reads, writes, commit_seq))` on success, `None`
    /// when validation failed and the operation must restart.
    fn commit(self, applied: Applied) -> TreeResult<Option<(u64, u64, u64)>> {
        let dirty: BTreeSet<Latch> = self
            .entries
            .iter()
            .filter(|e| e.dirty && !e.fresh)
            .map(|e| Latch::Node(e.id))
            .chain(self.meta.iter().filter(|m| m.2).map(|_| Latch::Meta))
            .collect();
        let mut write_set: Vec<VersionedAccess> = self
            .accesses()
            .into_iter()
            .filter(|a| dirty.contains(&a.latch))
            .collect();
        write_set.sort_by_key(|a| (a.level, a.latch));
        let mut held = 0;
        let mut ok = write_set.iter().all(|a| {
            let got = self.lock(a.latch, a.observed_version);
            held += usize::from(got);
            got
        });
        ok = ok
            && self
                .accesses()
                .iter()
                .filter(|a| !dirty.contains(&a.latch))
                .all(|a| self.current(a.latch) == a.observed_version);
        if ok && self.tree.config.variant == Variant::Ff && applied.splits > 1 {
            for a in &write_set[..held] {
                self.unlock(a.latch, a.observed_version, false);
            }
            self.abandon();
            return Err(TreeError::Invariant(format!(
                "{} splits in one ff write phase",
                applied.splits
            )));
        }
        if !ok {
            for a in &write_set[..held] {
                self.unlock(a.latch, a.observed_version, false);
            }
            self.abandon();
            return Ok(None);
        }
        let tree = self.tree;
        let mut writes = 0;
        for e in self.entries.iter().filter(|e| e.dirty) {
            *tree.slot(e.id)?.value.write() = e.node.clone();
            inject(tree.latency.write_us);
            writes += 1;
        }
        if let Some((_, m, true)) = self.meta {
            *tree.meta.value.write() = m;
        }
        if applied.new_key {
            tree.len.fetch_add(1, Ordering::AcqRel);
        }
        let seq = tree.commits.fetch_add(1, Ordering::AcqRel);
        for a in &write_set {
            self.unlock(a.latch, a.observed_version, true);
        }
        Ok(Some((self.reads, writes, seq)))
    }
}

impl NodeStore for OptimisticStore<'_> {
    fn capacity(&self) -> usize {
        self.tree.config.capacity
    }

    fn root(&mut self) -> TreeResult<NodeId> {
        Ok(self.meta().1.root)
    }

    fn height(&mut self) -> TreeResult<usize> {
        Ok(self.meta().1.height)
    }

    fn fetch(&mut self, id: NodeId) -> TreeResult<&Node> {
        let i = self.position(id)?;
        Ok(&self.entries[i].node)
    }

    fn write(&mut self, id: NodeId) -> TreeResult<&mut Node> {
        let i = self.position(id)?;
        let e = &mut self.entries[i];
        e.dirty = true;
        Ok(&mut e.node)
    }

    fn update(&mut self, id: NodeId, f: &mut dyn FnMut(&mut Node) -> bool) -> TreeResult<bool> {
        let i = self.position(id)?;
        let e = &mut self.entries[i];
        let changed = f(&mut e.node);
        e.dirty |= changed;
        Ok(changed)
    }

    fn allocate(&mut self, node: Node) -> TreeResult<NodeId> {
        let id = self.tree.reserve(self.actor)?;
        self.entries.push(Entry {
            id,
            node,
            version: 0,
            level: usize::MAX,
            dirty: true,
            fresh: true,
        });
        Ok(id)
    }

    fn grow_root(&mut self, sep: Key, right: NodeId) -> TreeResult<NodeId> {
        let old = self.meta().1;
        let id = self.allocate(Node::internal(vec![sep], vec![old.root, right]))?;
        let m = self.meta();
        m.1 = Meta {
            root: id,
            height: old.height + 1,
        };
        m.2 = true;
        Ok(id)
    }
}

/// Summary of one concurrent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcurrentReport {
    pub variant: Variant,
    pub actors: usize,
    pub ops: usize,
    pub completed: usize,
    /// Per-op samples in commit order.
    pub ops_stats: Vec<OpStats>,
    pub mean_latency_ns: f64,
    pub mean_windowed_range_ns: f64,
    pub mean_modeled_us: f64,
    pub mean_windowed_range_modeled_us: f64,
    pub mean_restarts: f64,
    pub max_restarts: u32,
    pub max_splits: u32,
    pub wall_ms: f64,
    /// Post-quiescence checks.
    pub lost_keys: usize,
    pub unexpected_keys: usize,
    pub structural_violations: usize,
    pub unsafe_nodes: usize,
}

/// Insert `keys` with `actors` threads. Key `i` goes to actor `i % actors`.
pub fn run_concurrent(
    config: TreeConfig,
    keys: &[Key],
    actors: usize,
    latency: LatencyConfig,
    window: usize,
) -> Result<ConcurrentReport, OlcError> {
    if actors == 0 || window == 0 {
        return Err(OlcError::Param(
            "actors and window must be at least 1".into(),
        ));
    }
    let tree = ConcurrentTree::new(config, latency)?;
    let start = Instant::now();
    let per_actor: Vec<Result<Vec<OpStats>, OlcError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..actors)
            .map(|a| {
                let tree = &tree;
                scope.spawn(move || {
                    let mut state = ActorState::default();
                    keys.iter()
                        .skip(a)
                        .step_by(actors)
                        .map(|&k| {
                            tree.insert(k, k, &mut state)
                                .map_err(|source| OlcError::Insert { key: k, source })
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(OlcError::ActorPanic)))
            .collect()
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut ops_stats = Vec::with_capacity(keys.len());
    for r in per_actor {
        ops_stats.extend(r?);
    }
    ops_stats.sort_by_key(|s| s.commit_seq);

    let snapshot = tree.to_tree();
    let mut expected = keys.to_vec();
    expected.sort_unstable();
    expected.dedup();
    let found = snapshot.scan_all();
    let found_set: BTreeSet<Key> = found.iter().copied().collect();
    let lost_keys = expected.iter().filter(|k| !found_set.contains(k)).count();
    let unexpected_keys = found.len() - (expected.len() - lost_keys);
    let structural_violations = snapshot.check_structure().len();
    let unsafe_nodes = if config.variant == Variant::Ff {
        snapshot.verify_no_unsafe().offending.len()
    } else {
        0
    };

    let n = ops_stats.len().max(1) as f64;
    let wall: Vec<u64> = ops_stats.iter().map(|s| s.wall_ns).collect();
    let modeled: Vec<u64> = ops_stats.iter().map(|s| s.modeled_us).collect();
    let wr = windowed_range(&wall, window).map_err(|e| OlcError::Param(e.to_string()))?;
    let wm = windowed_range(&modeled, window).map_err(|e| OlcError::Param(e.to_string()))?;
    Ok(ConcurrentReport {
        variant: config.variant,
        actors,
        ops: keys.len(),
        completed: ops_stats.len(),
        mean_latency_ns: wall.iter().sum::<u64>() as f64 / n,
        mean_windowed_range_ns: wr.mean,
        mean_modeled_us: modeled.iter().sum::<u64>() as f64 / n,
        mean_windowed_range_modeled_us: wm.mean,
        mean_restarts: ops_stats.iter().map(|s| f64::from(s.restarts)).sum::<f64>() / n,
        max_restarts: ops_stats.iter().map(|s| s.restarts).max().unwrap_or(0),
        max_splits: ops_stats.iter().map(|s| s.splits).max().unwrap_or(0),
        wall_ms,
        lost_keys,
        unexpected_keys,
        structural_violations,
        unsafe_nodes,
        ops_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::gen_uniform;

    fn cfg(v: Variant) -> TreeConfig {
        TreeConfig::new(8, v)
    }

    #[test]
    fn baseline_has_no_concurrent_form() {
        assert!(matches!(
            ConcurrentTree::new(cfg(Variant::Baseline), LatencyConfig::NONE),
            Err(OlcError::Variant(_))
        ));
    }

    #[test]
    fn single_actor_matches_sequential_tree() {
        let keys = gen_uniform(3000, 5, 1 << 30).unwrap();
        for v in [Variant::Clrs, Variant::Ff] {
            let t = ConcurrentTree::new(cfg(v), LatencyConfig::NONE).unwrap();
            let mut seq = Tree::new(cfg(v)).unwrap();
            let mut actor = ActorState::default();
            for &k in &keys {
                let s = t.insert(k, k, &mut actor).unwrap();
                let r = seq.insert(k, k).unwrap();
                assert_eq!(s.restarts, 0);
                assert_eq!(
                    (s.splits, s.reads, s.writes),
                    (r.splits, r.reads, r.writes),
                    "{v} key {k}"
                );
            }
            let snap = t.to_tree();
            assert_eq!(snap.scan_all(), seq.scan_all());
            assert_eq!(snap.height(), seq.height());
            assert!(snap.check_structure().is_empty());
            assert_eq!(t.lookup(keys[17]).unwrap(), Some(keys[17]));
            assert_eq!(t.lookup(u64::MAX).unwrap(), None);
        }
    }

    #[test]
    fn two_actors_disjoint_ranges_lose_nothing() {
        for v in [Variant::Clrs, Variant::Ff] {
            let t = ConcurrentTree::new(cfg(v), LatencyConfig::NONE).unwrap();
            std::thread::scope(|s| {
                for a in 0..2u64 {
                    let t = &t;
                    s.spawn(move || {
                        let mut st = ActorState::default();
                        for k in 0..10_000 {
                            t.insert(a * 1_000_000 + k, k, &mut st).unwrap();
                        }
                    });
                }
            });
            let snap = t.to_tree();
            assert_eq!(snap.len(), 20_000);
            assert_eq!(snap.scan_all().len(), 20_000);
            assert!(snap.check_structure().is_empty());
        }
    }

    #[test]
    fn run_reports_every_op() {
        let keys = gen_uniform(4000, 9, 1 << 30).unwrap();
        let r = run_concurrent(cfg(Variant::Ff), &keys, 4, LatencyConfig::default(), 1000).unwrap();
        assert_eq!(r.completed, 4000);
        assert_eq!(
            (
                r.lost_keys,
                r.unexpected_keys,
                r.structural_violations,
                r.unsafe_nodes
            ),
            (0, 0, 0, 0)
        );
        assert!(r.max_splits <= 1);
        assert!(r
            .ops_stats
            .windows(2)
            .all(|w| w[0].commit_seq < w[1].commit_seq));
        // every op pays at least one read and one write
        assert!(r.ops_stats.iter().all(|s| s.modeled_us >= 3));
        assert!(run_concurrent(cfg(Variant::Ff), &keys, 0, LatencyConfig::NONE, 10).is_err());
    }

    #[test]
    fn versioned_lock_protocol() {
        let v = Versioned::new(5u32);
        let (ver, val) = v.snapshot();
        assert_eq!((ver, val), (0, 5));
        assert!(v.try_lock(0));
        assert!(!v.try_lock(0));
        v.unlock(0, true);
        assert_eq!(v.version(), 2);
        assert!(!v.try_lock(0));
        assert!(v.try_lock(2));
        v.unlock(2, false);
        assert_eq!(v.version(), 2);
    }
}
