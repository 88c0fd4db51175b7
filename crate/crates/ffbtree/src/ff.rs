//! Fluctuation-free insertion.
//!
//! Every node carries a critical flag and internal nodes carry one bit per
//! child recording whether that child is critical. With those, a node's
//! *slack* is `F - popcount(bitmap)` (just `F` for a leaf): zero means
//! critical, i.e. the subtree can absorb exactly the splits it might be
//! asked to absorb. An insert does one root-to-leaf pass, picks at most one
//! node to split, inserts into the leaf, and then brings the flags and bits
//! on the descended path up to date.
//!
//! The split choice: a full leaf is split. Otherwise the bottommost interior
//! node with slack <= 1 is chosen; if its parent is itself tight (slack < 2)
//! the choice moves up until it reaches a critical node, the root, or a node
//! whose parent has room to spare. Splitting a node with slack 1 early keeps
//! runs of nearly-critical ancestors short, which is what bounds the number
//! of bitmap writes a single insert can cause.

use serde::Serialize;

use crate::error::{Result, TreeError};
use crate::node::{Key, Node, NodeId, Payload, MIN_INTERNAL_SPLIT};
use crate::store::{Applied, NodeStore};
use crate::tree::{InsertReport, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeClass {
    SafeNonCritical,
    Critical,
    Unsafe,
}

impl NodeClass {
    pub fn is_critical_or_unsafe(self) -> bool {
        self != NodeClass::SafeNonCritical
    }
}

/// What the read phase learned about one node on the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEntry {
    pub id: NodeId,
    pub leaf: bool,
    pub slack: isize,
    pub splittable: bool,
    pub keys: usize,
    /// Child position taken (internal) or insert position (leaf).
    pub route: usize,
    pub bits: Vec<bool>,
}

impl PathEntry {
    pub fn of(id: NodeId, node: &Node, capacity: usize, key: Key) -> Self {
        let route = if node.is_leaf() {
            node.search(key).unwrap_or_else(|i| i)
        } else {
            node.route(key)
        };
        PathEntry {
            id,
            leaf: node.is_leaf(),
            slack: node.slack(capacity),
            splittable: if node.is_leaf() {
                node.len() >= 2
            } else {
                node.len() >= MIN_INTERNAL_SPLIT
            },
            keys: node.len(),
            route,
            bits: node.child_bitmap.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescentContext {
    /// Bottommost node already flagged critical.
    pub last_critical: Option<NodeId>,
    /// Bottommost node this insert makes critical, with its parent.
    pub last_flag: Option<(NodeId, Option<NodeId>)>,
    pub path: Vec<PathEntry>,
}

/// Classify one node of the path that is not yet flagged.
pub fn examine_node(
    node: &Node,
    id: NodeId,
    parent: Option<NodeId>,
    capacity: usize,
    ctx: &mut DescentContext,
) {
    let free = node.free_space(capacity);
    if node.is_leaf() {
        if free <= 1 {
            ctx.last_flag = Some((id, parent));
        }
    } else if free <= node.bitmap_count() {
        ctx.last_critical = Some(id);
        ctx.last_flag = Some((id, parent));
    }
}

impl DescentContext {
    pub fn visit(&mut self, id: NodeId, node: &Node, capacity: usize, key: Key) {
        let parent = self.path.last().map(|e| e.id);
        if node.critical {
            self.last_critical = Some(id);
        } else {
            examine_node(node, id, parent, capacity, self);
        }
        self.path.push(PathEntry::of(id, node, capacity, key));
    }

    /// What to split before the leaf insert.
    pub fn split_target(&self, capacity: usize) -> Plan {
        plan_split(&self.path, capacity)
    }
}

/// Split choice over a root-to-leaf path; see the module docs.
pub fn choose_split(path: &[PathEntry]) -> Result<Option<usize>> {
    let leaf = path.len() - 1;
    if path[leaf].slack <= 0 {
        return Ok(Some(leaf));
    }
    let Some(mut d) = (0..leaf)
        .rev()
        .find(|&d| path[d].slack <= 1 && path[d].splittable)
    else {
        return Ok(None);
    };
    while !(path[d].slack <= 0 || d == 0 || path[d - 1].slack >= 2) {
        d -= 1;
        while d > 0 && !path[d].splittable {
            d -= 1;
        }
    }
    if !path[d].splittable {
        return Err(TreeError::Invariant(format!(
            "node {:?} must split but is too small at this capacity",
            path[d].id
        )));
    }
    Ok(Some(d))
}

/// Path state after a simulated insert.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    /// Slack of each node on the final path, root first.
    pub slack: Vec<isize>,
    /// Total slack below zero over the path (and the split halves).
    pub deficit: isize,
    /// Internal nodes on the path that are tight (slack <= 1) but too small
    /// to split. Once such a node is critical, no single split can protect it.
    pub stuck: usize,
}

/// Replay an insert on the path summary alone: optionally split `target`,
/// insert the key, refresh the bits. `None` if a step is impossible (full
/// parent, node too small to split, full leaf left unsplit).
pub fn simulate(path: &[PathEntry], capacity: usize, target: Option<usize>) -> Option<Outcome> {
    let cap = capacity as isize;
    let slack_of = |leaf: bool, keys: usize, bits: &[bool]| {
        let free = cap - keys as isize;
        if leaf {
            free
        } else {
            free - bits.iter().filter(|b| **b).count() as isize
        }
    };
    let mut nodes: Vec<(bool, usize, Vec<bool>, usize)> = path
        .iter()
        .map(|e| (e.leaf, e.keys, e.bits.clone(), e.route))
        .collect();
    let mut placed = false;
    let mut deficit = 0;
    if let Some(t) = target {
        if t > 0 && nodes[t - 1].1 >= capacity {
            return None;
        }
        let (leaf, k, bits, r) = nodes[t].clone();
        let (lk, lbits, rk, rbits, right, nr);
        if leaf {
            let total = k + 1;
            if total < 2 {
                return None;
            }
            let mid = total / 2;
            (lk, rk, lbits, rbits) = (mid, total - mid, vec![], vec![]);
            right = r >= mid;
            nr = 0;
            placed = true;
        } else {
            if k < MIN_INTERNAL_SPLIT {
                return None;
            }
            let mid = k / 2;
            (lk, rk) = (mid, k - mid - 1);
            (lbits, rbits) = (bits[..=mid].to_vec(), bits[mid + 1..].to_vec());
            right = r > mid;
            nr = if right { r - mid - 1 } else { r };
        }
        let (ls, rs) = (slack_of(leaf, lk, &lbits), slack_of(leaf, rk, &rbits));
        deficit += (-ls).max(0) + (-rs).max(0);
        nodes[t] = if right {
            (leaf, rk, rbits, nr)
        } else {
            (leaf, lk, lbits, nr)
        };
        let bits = [ls <= 0, rs <= 0];
        let side = usize::from(right);
        if t == 0 {
            nodes.insert(0, (false, 1, bits.to_vec(), side));
        } else {
            let p = &mut nodes[t - 1];
            let pr = p.3;
            p.1 += 1;
            p.2[pr] = bits[0];
            p.2.insert(pr + 1, bits[1]);
            p.3 = pr + side;
        }
    }
    let last = nodes.len() - 1;
    if !placed {
        if nodes[last].1 >= capacity {
            return None;
        }
        nodes[last].1 += 1;
    }
    let mut slack = vec![0; nodes.len()];
    let mut stuck = 0;
    for d in (0..nodes.len()).rev() {
        let (leaf, k, ref bits, _) = nodes[d];
        let s = slack_of(leaf, k, bits);
        deficit += (-s).max(0);
        slack[d] = s;
        if !leaf && k < MIN_INTERNAL_SPLIT && s <= 1 {
            stuck += 1;
        }
        if d > 0 {
            let r = nodes[d - 1].3;
            nodes[d - 1].2[r] = s <= 0;
        }
    }
    Some(Outcome {
        slack,
        deficit,
        stuck,
    })
}

/// What an insert does before touching the leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plan {
    Keep,
    Split(usize),
    /// Full leaf under a full parent: only reachable once the tree already
    /// holds an unsafe node, which small capacities cannot always avoid.
    Cascade,
}

/// Pick the node to split. The rule of [`choose_split`] is used whenever it
/// keeps the path safe and leaves no stuck node, which is always the case
/// once nodes hold 7 or more keys. Otherwise every single-split option is
/// simulated and ranked by deficit, then stuck nodes, then preferring the
/// default choice and lower nodes.
pub fn plan_split(path: &[PathEntry], capacity: usize) -> Plan {
    let default = choose_split(path).ok().flatten();
    let to_plan = |t: Option<usize>| t.map_or(Plan::Keep, Plan::Split);
    if let Some(out) = simulate(path, capacity, default) {
        if out.deficit == 0 && out.stuck == 0 {
            return to_plan(default);
        }
    }
    std::iter::once(None)
        .chain((0..path.len()).rev().map(Some))
        .filter_map(|t| simulate(path, capacity, t).map(|o| (o, t)))
        .min_by_key(|(o, t)| (o.deficit, o.stuck, *t != default, std::cmp::Reverse(*t)))
        .map_or(Plan::Cascade, |(_, t)| to_plan(t))
}

/// One pass down, at most one split chosen by [`plan_split`], the leaf
/// insert, then the flag and bitmap refresh along the path.
pub fn ff_insert<S: NodeStore + ?Sized>(s: &mut S, key: Key, payload: Payload) -> Result<Applied> {
    let cap = s.capacity();
    let mut ctx = DescentContext::default();
    let mut cur = s.root()?;
    loop {
        let node = s.fetch(cur)?;
        ctx.visit(cur, node, cap, key);
        if node.is_leaf() {
            break;
        }
        cur = node.find_next_node(key);
    }
    if s.fetch(cur)?.search(key).is_ok() {
        s.write(cur)?.upsert(key, payload);
        return Ok(Applied {
            splits: 0,
            new_key: false,
        });
    }
    let mut path: Vec<NodeId> = ctx.path.iter().map(|e| e.id).collect();
    let mut splits = 0;
    let mut inserted = false;
    match ctx.split_target(cap) {
        Plan::Keep => {}
        Plan::Split(t) => {
            inserted = split_on_path(s, &mut path, t, key, Some(payload))?;
            splits = 1;
        }
        Plan::Cascade => {
            splits = cascade_on_path(s, &mut path, key, payload)?;
            inserted = true;
        }
    }
    if !inserted {
        let leaf = *path.last().expect("path");
        let node = s.write(leaf)?;
        if node.is_full(cap) {
            return Err(TreeError::Invariant(format!(
                "leaf {leaf:?} full at insert time"
            )));
        }
        node.upsert(key, payload);
    }
    propagate_state(s, &path, key)?;
    Ok(Applied {
        splits,
        new_key: true,
    })
}

/// Bottom-up split propagation on the path, for states no single split can
/// handle. Returns the number of splits.
fn cascade_on_path<S: NodeStore + ?Sized>(
    s: &mut S,
    path: &mut Vec<NodeId>,
    key: Key,
    payload: Payload,
) -> Result<u32> {
    let cap = s.capacity();
    let mut level = path.len() - 1;
    s.write(path[level])?.upsert(key, payload);
    let mut splits = 0;
    while s.fetch(path[level])?.len() > cap {
        let x = path[level];
        let (right, sep) = s.write(x)?.split()?;
        let r = s.allocate(right)?;
        splits += 1;
        let parent = if level == 0 {
            let root = s.grow_root(sep, r)?;
            path.insert(0, root);
            level = 1;
            root
        } else {
            let p = path[level - 1];
            let idx = s.fetch(p)?.route(key);
            s.write(p)?.insert_separator(idx, sep, r);
            p
        };
        path[level] = if key >= sep { r } else { x };
        record_halves(s, parent, x, r, sep)?;
        level -= 1;
    }
    Ok(splits)
}

/// Set the flags of two fresh halves and their bits in the parent.
fn record_halves<S: NodeStore + ?Sized>(
    s: &mut S,
    parent: NodeId,
    x: NodeId,
    r: NodeId,
    sep: Key,
) -> Result<()> {
    let cap = s.capacity();
    let xc = s.fetch(x)?.slack(cap) <= 0;
    let rc = s.fetch(r)?.slack(cap) <= 0;
    s.write(x)?.critical = xc;
    s.write(r)?.critical = rc;
    let pn = s.write(parent)?;
    let idx = pn.route(sep) - 1;
    pn.child_bitmap[idx] = xc;
    pn.child_bitmap[idx + 1] = rc;
    Ok(())
}

/// Split `path[t]`, fixing the path so it still leads to `key`.
/// A leaf split takes the pending entry with it; returns whether it did.
fn split_on_path<S: NodeStore + ?Sized>(
    s: &mut S,
    path: &mut Vec<NodeId>,
    t: usize,
    key: Key,
    pending: Option<Payload>,
) -> Result<bool> {
    let cap = s.capacity();
    let x = path[t];
    if t > 0 && s.fetch(path[t - 1])?.is_full(cap) {
        return Err(TreeError::Invariant(format!(
            "parent {:?} full when splitting {x:?}",
            path[t - 1]
        )));
    }
    let node = s.write(x)?;
    let took = match pending {
        Some(v) if node.is_leaf() => {
            node.upsert(key, v);
            true
        }
        _ => false,
    };
    let (right, sep) = node.split()?;
    let r = s.allocate(right)?;
    let parent = if t == 0 {
        let root = s.grow_root(sep, r)?;
        path.insert(0, root);
        root
    } else {
        let p = path[t - 1];
        let pn = s.write(p)?;
        let idx = pn.route(key);
        pn.insert_separator(idx, sep, r);
        p
    };
    let t = if t == 0 { 1 } else { t };
    path[t] = if key >= sep { r } else { x };
    record_halves(s, parent, x, r, sep)?;
    Ok(took)
}

/// Recompute flags bottom-up along `path` and record them in the parents'
/// bitmaps. Only nodes whose stored state changes get dirtied. A node with
/// negative slack (unsafe) is flagged like a critical one.
fn propagate_state<S: NodeStore + ?Sized>(s: &mut S, path: &[NodeId], key: Key) -> Result<()> {
    let cap = s.capacity();
    for d in (0..path.len()).rev() {
        let id = path[d];
        let crit = s.fetch(id)?.slack(cap) <= 0;
        s.update(id, &mut |n| {
            std::mem::replace(&mut n.critical, crit) != crit
        })?;
        if d > 0 {
            s.update(path[d - 1], &mut |p| {
                let i = p.route(key);
                std::mem::replace(&mut p.child_bitmap[i], crit) != crit
            })?;
        }
    }
    Ok(())
}

impl Tree {
    /// Split `id` on its own, as an insert would. Fails if the parent is full.
    pub fn proactive_split(&mut self, id: NodeId) -> Result<InsertReport> {
        let first = match self.pager.peek(id) {
            Some(n) if !n.is_empty() => n.keys[0],
            Some(_) => return Err(TreeError::Structural(format!("node {id:?} is empty"))),
            None => return Err(TreeError::UnknownNode(id)),
        };
        self.pager.begin_op()?;
        let height = self.height;
        let out = (|| {
            let mut path = self.descend(first)?;
            let t = path
                .iter()
                .position(|p| *p == id)
                .ok_or_else(|| TreeError::Structural(format!("node {id:?} not reachable")))?;
            path.truncate(t + 1);
            split_on_path(self, &mut path, t, first, None)?;
            propagate_state(self, &path, first)
        })();
        match out {
            Ok(()) => self.finish(1, height),
            Err(e) => {
                self.pager.abort_op();
                Err(e)
            }
        }
    }

    /// Oracle class of one node, computed from scratch (stored flags ignored).
    pub fn classify_node(&self, id: NodeId) -> NodeClass {
        let node = self.pager.peek(id).expect("reachable node");
        let free = node.free_space(self.config.capacity);
        if node.is_leaf() {
            return if free == 0 {
                NodeClass::Critical
            } else {
                NodeClass::SafeNonCritical
            };
        }
        let s = node
            .children
            .iter()
            .filter(|c| self.classify_node(**c).is_critical_or_unsafe())
            .count();
        classify(free, s)
    }

    /// Oracle class of every reachable node, indexed by node id.
    pub fn classify_all(&self) -> Vec<Option<NodeClass>> {
        let cap = self.config.capacity;
        let mut out = vec![None; self.pager.node_count()];
        // reverse preorder visits children before parents
        for (id, _) in self.nodes().into_iter().rev() {
            let node = self.pager.peek(id).expect("reachable node");
            let free = node.free_space(cap);
            let class = if node.is_leaf() {
                if free == 0 {
                    NodeClass::Critical
                } else {
                    NodeClass::SafeNonCritical
                }
            } else {
                let s = node
                    .children
                    .iter()
                    .filter(|c| out[c.index()].is_some_and(NodeClass::is_critical_or_unsafe))
                    .count();
                classify(free, s)
            };
            out[id.index()] = Some(class);
        }
        out
    }

    /// Internal nodes the oracle calls unsafe. Empty means the tree is fine.
    pub fn verify_no_unsafe(&self) -> UnsafeReport {
        let classes = self.classify_all();
        let offending = self
            .nodes()
            .into_iter()
            .map(|(id, _)| id)
            .filter(|id| {
                !self.pager.peek(*id).expect("node").is_leaf()
                    && classes[id.index()] == Some(NodeClass::Unsafe)
            })
            .collect::<Vec<_>>();
        UnsafeReport {
            ok: offending.is_empty(),
            offending,
        }
    }

    /// Compare stored flags and bits against the oracle.
    ///
    /// A set flag or bit on a node the oracle calls safe is an error. The
    /// other direction (critical by the oracle, not yet recorded) is lagging
    /// and tolerated, though this implementation never produces it.
    pub fn verify_flag_consistency(&self) -> FlagReport {
        let classes = self.classify_all();
        let crit = |id: NodeId| classes[id.index()].is_some_and(NodeClass::is_critical_or_unsafe);
        let mut rep = FlagReport::default();
        for (id, _) in self.nodes() {
            let node = self.pager.peek(id).expect("node");
            match (node.critical, crit(id)) {
                (true, false) => rep.flagged_but_safe.push(id),
                (false, true) => rep.lagging.push(id),
                _ => {}
            }
            for (c, bit) in node.children.iter().zip(&node.child_bitmap) {
                match (*bit, crit(*c)) {
                    (true, false) => rep.bit_but_safe.push(*c),
                    (false, true) => rep.lagging_bits.push(*c),
                    _ => {}
                }
            }
        }
        rep.ok = rep.flagged_but_safe.is_empty() && rep.bit_but_safe.is_empty();
        rep
    }

    /// Set every flag and bit from the oracle.
    pub fn sync_critical_state(&mut self) {
        let track = self.config.variant == crate::tree::Variant::Ff;
        let classes = self.classify_all();
        for (id, _) in self.nodes() {
            let bits: Vec<bool> = {
                let node = self.pager.peek(id).expect("node");
                node.children
                    .iter()
                    .map(|c| {
                        track && classes[c.index()].is_some_and(NodeClass::is_critical_or_unsafe)
                    })
                    .collect()
            };
            let node = self.pager.peek_mut(id).expect("node");
            node.critical =
                track && classes[id.index()].is_some_and(NodeClass::is_critical_or_unsafe);
            node.child_bitmap = bits;
        }
    }
}

fn classify(free: usize, critical_children: usize) -> NodeClass {
    use std::cmp::Ordering::*;
    match free.cmp(&critical_children) {
        Less => NodeClass::Unsafe,
        Equal => NodeClass::Critical,
        Greater => NodeClass::SafeNonCritical,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UnsafeReport {
    pub ok: bool,
    pub offending: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FlagReport {
    pub ok: bool,
    pub flagged_but_safe: Vec<NodeId>,
    pub bit_but_safe: Vec<NodeId>,
    pub lagging: Vec<NodeId>,
    pub lagging_bits: Vec<NodeId>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Shape, TreeConfig, Variant};

    fn leaf(keys: &[u64]) -> Shape {
        Shape::Leaf(keys.to_vec())
    }

    fn ff(cap: usize, shape: &Shape) -> Tree {
        Tree::from_shape(TreeConfig::new(cap, Variant::Ff), shape).unwrap()
    }

    #[test]
    fn examine_leaf_threshold() {
        let mut ctx = DescentContext::default();
        examine_node(
            &Node::leaf(vec![1, 2]),
            NodeId(1),
            Some(NodeId(0)),
            4,
            &mut ctx,
        );
        assert_eq!(ctx, DescentContext::default());
        examine_node(
            &Node::leaf(vec![1, 2, 3]),
            NodeId(1),
            Some(NodeId(0)),
            4,
            &mut ctx,
        );
        assert_eq!(ctx.last_flag, Some((NodeId(1), Some(NodeId(0)))));
        assert_eq!(ctx.last_critical, None);
    }

    #[test]
    fn examine_internal_threshold() {
        let mut n = Node::internal(vec![10, 20], (0..3).map(NodeId).collect());
        n.child_bitmap = vec![true, false, true];
        let mut ctx = DescentContext::default();
        examine_node(&n, NodeId(5), None, 4, &mut ctx);
        assert_eq!(ctx.last_critical, Some(NodeId(5)));
        assert_eq!(ctx.last_flag, Some((NodeId(5), None)));
    }

    #[test]
    fn three_full_leaves_make_the_root_unsafe() {
        // C=4: root has two keys (F=2) and three full children
        let s = Shape::Internal(
            vec![10, 20],
            vec![
                leaf(&[1, 2, 3, 4]),
                leaf(&[10, 11, 12, 13]),
                leaf(&[20, 21, 22, 23]),
            ],
        );
        let t = ff(4, &s);
        assert_eq!(t.classify_node(t.root()), NodeClass::Unsafe);
        assert!(!t.verify_no_unsafe().ok);
    }

    #[test]
    fn two_full_leaves_make_the_root_critical() {
        // C=5: root has three keys (F=2) and two of four children full
        let s = Shape::Internal(
            vec![10, 20, 30],
            vec![
                leaf(&[1, 2, 3, 4, 5]),
                leaf(&[10]),
                leaf(&[20, 21, 22, 23, 24]),
                leaf(&[30]),
            ],
        );
        let mut t = ff(5, &s);
        assert_eq!(t.classify_node(t.root()), NodeClass::Critical);
        assert!(t.node(t.root()).unwrap().critical);
        assert!(t.verify_no_unsafe().ok);
        // the root is the bottommost critical node on the way to leaf [10]
        let before = t.height();
        let r = t.insert(11, 0).unwrap();
        assert_eq!(r.splits, 1);
        assert_eq!(t.height(), before + 1);
        assert!(t.check_structure().is_empty());
        assert!(t.verify_no_unsafe().ok);
    }

    #[test]
    fn safe_when_no_child_is_critical() {
        let s = Shape::Internal(vec![10], vec![leaf(&[1]), leaf(&[10])]);
        let t = ff(4, &s);
        assert_eq!(t.classify_node(t.root()), NodeClass::SafeNonCritical);
    }

    #[test]
    fn full_leaf_splits_alone() {
        // C=4, the leaf [1..4] is critical; its parent has one slot left after it
        let s = Shape::Internal(
            vec![10, 20, 30],
            vec![leaf(&[1, 2, 3, 4]), leaf(&[10]), leaf(&[20]), leaf(&[30])],
        );
        let mut t = ff(4, &s);
        assert!(t.node(t.root()).unwrap().child_bitmap[0]);
        let r = t.insert(5, 5).unwrap();
        assert_eq!(r.splits, 1);
        assert_eq!(t.height(), 2);
        let root = t.node(t.root()).unwrap();
        assert_eq!(root.free_space(4), 0);
        assert_eq!(root.child_bitmap, vec![false; 5]);
        // leaf, new leaf, parent
        assert_eq!((r.reads, r.writes), (2, 3));
        assert!(t.check_structure().is_empty());
    }

    #[test]
    fn zero_split_insert_costs_height_plus_one() {
        let s = Shape::Internal(vec![10], vec![leaf(&[1]), leaf(&[10])]);
        let mut t = ff(8, &s);
        let r = t.insert(2, 2).unwrap();
        assert_eq!((r.total, r.splits, r.fluctuation), (3, 0, 0));
    }

    #[test]
    fn proactive_split_of_leaf_fills_parent() {
        // C=4: full leaf under a parent with one free slot
        let s = Shape::Internal(
            vec![10, 20, 30],
            vec![leaf(&[1, 2, 3, 4]), leaf(&[10]), leaf(&[20]), leaf(&[30])],
        );
        let mut t = ff(4, &s);
        let target = t.node(t.root()).unwrap().children[0];
        t.proactive_split(target).unwrap();
        assert_eq!(t.node(t.root()).unwrap().free_space(4), 0);
        assert_eq!(t.height(), 2);
        // a second split below the now-full parent must refuse
        let target = t.node(t.root()).unwrap().children[1];
        assert!(matches!(
            t.proactive_split(target),
            Err(TreeError::Invariant(_))
        ));
    }

    #[test]
    fn proactive_split_of_critical_internal_node() {
        // C=4: internal [10,20,30,40] is full with no critical children
        let inner = Shape::Internal(
            vec![10, 20, 30, 40],
            vec![
                leaf(&[1]),
                leaf(&[10]),
                leaf(&[20]),
                leaf(&[30]),
                leaf(&[40]),
            ],
        );
        let s = Shape::Internal(
            vec![100],
            vec![
                inner,
                Shape::Internal(vec![200], vec![leaf(&[100]), leaf(&[200])]),
            ],
        );
        let mut t = ff(4, &s);
        let target = t.node(t.root()).unwrap().children[0];
        assert_eq!(t.classify_node(target), NodeClass::Critical);
        t.proactive_split(target).unwrap();
        let root = t.node(t.root()).unwrap();
        assert_eq!(root.keys, vec![30, 100]);
        for c in &root.children[..2] {
            assert!(t.node(*c).unwrap().free_space(4) >= 2);
            assert!(!t.node(*c).unwrap().critical);
        }
    }

    #[test]
    fn critical_root_split_builds_new_root() {
        let s = leaf(&[1, 2, 3, 4]);
        let mut t = ff(4, &s);
        assert!(t.node(t.root()).unwrap().critical);
        t.proactive_split(t.root()).unwrap();
        let root = t.node(t.root()).unwrap();
        assert_eq!((root.keys.len(), root.children.len()), (1, 2));
    }

    #[test]
    fn split_choice_walks_up_through_tight_parents() {
        let e = |slack, splittable| PathEntry {
            id: NodeId(0),
            leaf: false,
            slack,
            splittable,
            keys: 0,
            route: 0,
            bits: vec![],
        };
        let mut leaf_e = e(3, true);
        leaf_e.leaf = true;
        // roomy root, two tight interior nodes, roomy leaf
        assert_eq!(
            choose_split(&[e(4, true), e(1, true), e(1, true), leaf_e.clone()]).unwrap(),
            Some(1)
        );
        // critical interior node stops the walk
        assert_eq!(
            choose_split(&[e(4, true), e(0, true), e(1, true), leaf_e.clone()]).unwrap(),
            Some(1)
        );
        assert_eq!(
            choose_split(&[e(1, true), e(2, true), e(1, true), leaf_e.clone()]).unwrap(),
            Some(2)
        );
        assert_eq!(
            choose_split(&[e(3, true), e(2, true), leaf_e.clone()]).unwrap(),
            None
        );
        leaf_e.slack = 0;
        assert_eq!(choose_split(&[e(0, true), leaf_e]).unwrap(), Some(1));
    }

    #[test]
    fn flags_are_exact_after_inserts() {
        let mut t = Tree::with_capacity(4, Variant::Ff).unwrap();
        for k in [
            50u64, 10, 90, 30, 70, 20, 60, 80, 40, 55, 65, 15, 25, 35, 45,
        ] {
            t.insert(k, k).unwrap();
            let rep = t.verify_flag_consistency();
            assert!(
                rep.ok && rep.lagging.is_empty() && rep.lagging_bits.is_empty(),
                "{rep:?}"
            );
        }
    }

    #[test]
    fn split_clears_flags() {
        let mut t = ff(4, &leaf(&[1, 2, 3, 4]));
        t.proactive_split(t.root()).unwrap();
        for (id, _) in t.nodes() {
            assert!(!t.node(id).unwrap().critical);
        }
    }
}
