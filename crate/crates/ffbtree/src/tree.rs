use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_insert, clrs_insert};
use crate::error::{Result, TreeError};
use crate::ff::ff_insert;
use crate::node::{Key, Node, NodeId, NodeKind, Payload};
use crate::pager::{IoReport, Pager};
use crate::store::descend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Bottom-up split propagation.
    Baseline,
    /// Top-down preemptive splitting of full nodes.
    Clrs,
    /// Fluctuation-free: at most one proactive split per insert.
    Ff,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Clrs, Variant::Ff];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Clrs => "clrs",
            Variant::Ff => "ff",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = TreeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "clrs" => Ok(Variant::Clrs),
            "ff" => Ok(Variant::Ff),
            other => Err(TreeError::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub capacity: usize,
    pub variant: Variant,
}

impl TreeConfig {
    pub fn new(capacity: usize, variant: Variant) -> Self {
        TreeConfig { capacity, variant }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity < 3 {
            return Err(TreeError::Config(format!(
                "capacity must be >= 3, got {}",
                self.capacity
            )));
        }
        Ok(())
    }
}

/// What one insert cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertReport {
    pub reads: u64,
    pub writes: u64,
    pub total: u64,
    pub splits: u32,
    /// Height when the insert started.
    pub height: u32,
    /// `total - (height + 1)`.
    pub fluctuation: u64,
}

impl InsertReport {
    pub fn new(io: IoReport, splits: u32, height: u32) -> Result<Self> {
        let floor = height as u64 + 1;
        if io.total < floor {
            return Err(TreeError::Invariant(format!(
                "insert cost {} below the floor {floor} at height {height}",
                io.total
            )));
        }
        Ok(InsertReport {
            reads: io.reads,
            writes: io.writes,
            total: io.total,
            splits,
            height,
            fluctuation: io.total - floor,
        })
    }
}

/// Nested description of a tree, used to build fixtures by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(Vec<Key>),
    Internal(Vec<Key>, Vec<Shape>),
}

impl Shape {
    pub fn depth(&self) -> usize {
        match self {
            Shape::Leaf(_) => 1,
            Shape::Internal(_, ch) => 1 + ch.first().map_or(0, Shape::depth),
        }
    }
}

/// One structural problem found by [`Tree::check_structure`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: NodeId,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}: {} ({})", self.node.0, self.rule, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub(crate) pager: Pager,
    pub(crate) root: NodeId,
    pub(crate) height: usize,
    pub(crate) config: TreeConfig,
    pub(crate) len: usize,
}

impl Tree {
    pub fn new(config: TreeConfig) -> Result<Self> {
        config.validate()?;
        let mut pager = Pager::new();
        let root = pager.install(Node::new(NodeKind::Leaf));
        Ok(Tree {
            pager,
            root,
            height: 1,
            config,
            len: 0,
        })
    }

    pub fn with_capacity(capacity: usize, variant: Variant) -> Result<Self> {
        Tree::new(TreeConfig::new(capacity, variant))
    }

    /// Build a tree from a nested shape. Leaf payloads equal their keys.
    /// Critical flags and bitmaps are derived from the tree itself.
    pub fn from_shape(config: TreeConfig, shape: &Shape) -> Result<Self> {
        config.validate()?;
        fn build(p: &mut Pager, s: &Shape, len: &mut usize) -> NodeId {
            match s {
                Shape::Leaf(keys) => {
                    *len += keys.len();
                    p.install(Node::leaf(keys.clone()))
                }
                Shape::Internal(keys, ch) => {
                    let ids = ch.iter().map(|c| build(p, c, len)).collect();
                    p.install(Node::internal(keys.clone(), ids))
                }
            }
        }
        let mut pager = Pager::new();
        let mut len = 0;
        let root = build(&mut pager, shape, &mut len);
        let mut tree = Tree {
            pager,
            root,
            height: shape.depth(),
            config,
            len,
        };
        let problems = tree.check_structure();
        if let Some(v) = problems.first() {
            return Err(TreeError::Structural(format!("shape rejected: {v}")));
        }
        tree.sync_critical_state();
        Ok(tree)
    }

    /// Assemble a tree from a node arena. Unreachable nodes are allowed and
    /// ignored by every traversal.
    pub(crate) fn from_parts(
        config: TreeConfig,
        nodes: Vec<Node>,
        root: NodeId,
        height: usize,
        len: usize,
    ) -> Self {
        let mut pager = Pager::new();
        for n in nodes {
            pager.install(n);
        }
        Tree {
            pager,
            root,
            height,
            config,
            len,
        }
    }

    pub fn config(&self) -> TreeConfig {
        self.config
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.pager.peek(id)
    }

    /// Direct node access bypassing accounting. For fixtures and fault injection.
    pub fn node_mut_unaccounted(&mut self, id: NodeId) -> Option<&mut Node> {
        self.pager.peek_mut(id)
    }

    pub fn pager(&self) -> &Pager {
        &self.pager
    }

    pub fn insert(&mut self, key: Key, payload: Payload) -> Result<InsertReport> {
        self.pager.begin_op()?;
        let height = self.height;
        let out = match self.config.variant {
            Variant::Baseline => baseline_insert(self, key, payload),
            Variant::Clrs => clrs_insert(self, key, payload),
            Variant::Ff => ff_insert(self, key, payload),
        };
        match out {
            Ok(a) => {
                self.len += usize::from(a.new_key);
                self.finish(a.splits, height)
            }
            Err(e) => {
                self.pager.abort_op();
                Err(e)
            }
        }
    }

    /// Fetch the root-to-leaf path for `key` (charges one read per level).
    pub(crate) fn descend(&mut self, key: Key) -> Result<Vec<NodeId>> {
        descend(self, key)
    }

    pub(crate) fn finish(&mut self, splits: u32, height: usize) -> Result<InsertReport> {
        let io = self.pager.end_op()?;
        InsertReport::new(io, splits, height as u32)
    }

    pub fn lookup(&mut self, key: Key) -> Result<Option<Payload>> {
        Ok(self.lookup_io(key)?.0)
    }

    /// Lookup plus its cost; a lookup reads exactly `height` nodes.
    pub fn lookup_io(&mut self, key: Key) -> Result<(Option<Payload>, IoReport)> {
        self.pager.begin_op()?;
        let found = match self.descend(key) {
            Ok(path) => {
                let leaf = self.pager.fetch(*path.last().expect("non-empty path"))?;
                leaf.search(key).ok().map(|i| leaf.values[i])
            }
            Err(e) => {
                self.pager.abort_op();
                return Err(e);
            }
        };
        Ok((found, self.pager.end_op()?))
    }

    /// All keys in order, by recursive descent.
    pub fn scan_all(&self) -> Vec<Key> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.pager.peek(id).expect("reachable node");
            if n.is_leaf() {
                out.extend_from_slice(&n.keys);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }

    /// Every reachable node with its depth (root is depth 0), preorder.
    pub fn nodes(&self) -> Vec<(NodeId, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root, 0)];
        while let Some((id, d)) = stack.pop() {
            out.push((id, d));
            let n = self.pager.peek(id).expect("reachable node");
            if !n.is_leaf() {
                stack.extend(n.children.iter().rev().map(|c| (*c, d + 1)));
            }
        }
        out
    }

    /// Checks leaf depth, key order, routing ranges, occupancy and child counts.
    pub fn check_structure(&self) -> Vec<Violation> {
        let cap = self.config.capacity;
        let mut out = Vec::new();
        let mut push = |node, rule, detail: String| out.push(Violation { node, rule, detail });
        let mut stack: Vec<(NodeId, usize, Option<Key>, Option<Key>)> =
            vec![(self.root, 1, None, None)];
        while let Some((id, depth, lo, hi)) = stack.pop() {
            let Some(n) = self.pager.peek(id) else {
                push(id, "dangling child", "no such node".into());
                continue;
            };
            if !n.keys.windows(2).all(|w| w[0] < w[1]) {
                push(id, "unsorted keys", format!("{:?}", n.keys));
            }
            let outside = n
                .keys
                .iter()
                .filter(|k| lo.is_some_and(|l| **k < l) || hi.is_some_and(|h| **k >= h))
                .count();
            if outside > 0 {
                push(
                    id,
                    "key outside routing range",
                    format!("{outside} keys not in [{lo:?}, {hi:?})"),
                );
            }
            if n.len() > cap {
                push(id, "over capacity", format!("{} > {cap}", n.len()));
            }
            if id != self.root && n.is_leaf() && n.is_empty() {
                push(id, "empty node", String::new());
            }
            match n.kind {
                NodeKind::Leaf => {
                    if depth != self.height {
                        push(
                            id,
                            "leaf depth",
                            format!("leaf at {depth}, height {}", self.height),
                        );
                    }
                    if n.values.len() != n.keys.len() {
                        push(id, "value count", format!("{} values", n.values.len()));
                    }
                }
                NodeKind::Internal => {
                    if n.children.len() != n.keys.len() + 1 {
                        push(
                            id,
                            "child count",
                            format!("{} children, {} keys", n.children.len(), n.len()),
                        );
                        continue;
                    }
                    if n.child_bitmap.len() != n.children.len() {
                        push(id, "bitmap length", format!("{}", n.child_bitmap.len()));
                    }
                    if depth >= self.height {
                        push(
                            id,
                            "internal depth",
                            format!("internal node at depth {depth}"),
                        );
                        continue;
                    }
                    for (i, c) in n.children.iter().enumerate() {
                        let clo = if i == 0 { lo } else { Some(n.keys[i - 1]) };
                        let chi = if i == n.keys.len() {
                            hi
                        } else {
                            Some(n.keys[i])
                        };
                        stack.push((*c, depth + 1, clo, chi));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Shape {
        Shape::Internal(
            vec![10],
            vec![Shape::Leaf(vec![1, 5]), Shape::Leaf(vec![10, 12])],
        )
    }

    #[test]
    fn empty_tree() {
        let mut t = Tree::with_capacity(4, Variant::Baseline).unwrap();
        assert_eq!(t.scan_all(), Vec::<Key>::new());
        assert_eq!(t.lookup(3).unwrap(), None);
        assert!(t.check_structure().is_empty());
    }

    #[test]
    fn capacity_floor() {
        assert!(Tree::with_capacity(2, Variant::Ff).is_err());
    }

    #[test]
    fn lookup_reads_height_nodes() {
        let shape = Shape::Internal(
            vec![100],
            vec![
                small(),
                Shape::Internal(
                    vec![200],
                    vec![Shape::Leaf(vec![100]), Shape::Leaf(vec![200])],
                ),
            ],
        );
        let mut t = Tree::from_shape(TreeConfig::new(4, Variant::Baseline), &shape).unwrap();
        assert_eq!(t.height(), 3);
        let (v, io) = t.lookup_io(12).unwrap();
        assert_eq!(v, Some(12));
        assert_eq!(io, IoReport::new(3, 0));
        assert_eq!(t.scan_all(), vec![1, 5, 10, 12, 100, 200]);
    }

    #[test]
    fn corrupted_separator_is_one_violation() {
        let mut t = Tree::from_shape(TreeConfig::new(4, Variant::Baseline), &small()).unwrap();
        assert!(t.check_structure().is_empty());
        let root = t.root();
        t.node_mut_unaccounted(root).unwrap().keys[0] = 3;
        let v = t.check_structure();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, "key outside routing range");
    }

    #[test]
    fn shape_rejects_bad_depth() {
        let bad = Shape::Internal(vec![10], vec![Shape::Leaf(vec![1]), small()]);
        assert!(Tree::from_shape(TreeConfig::new(4, Variant::Ff), &bad).is_err());
    }
}
