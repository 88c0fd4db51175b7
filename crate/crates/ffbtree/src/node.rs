use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};

pub type Key = u64;

/// Fewest keys an internal node needs to split. A one-key node splits into
/// two unary routing nodes (no keys, one child each).
pub const MIN_INTERNAL_SPLIT: usize = 1;
pub type Payload = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf,
    Internal,
}

/// One tree page.
///
/// Leaves hold `keys`/`values` pairs. Internal nodes hold separators and
/// `keys.len() + 1` children; `child_bitmap` runs parallel to `children`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub keys: Vec<Key>,
    pub children: Vec<NodeId>,
    pub values: Vec<Payload>,
    pub critical: bool,
    pub child_bitmap: Vec<bool>,
    pub version: u64,
}

impl Node {
    pub fn new(kind: NodeKind) -> Self {
        Node {
            kind,
            keys: Vec::new(),
            children: Vec::new(),
            values: Vec::new(),
            critical: false,
            child_bitmap: Vec::new(),
            version: 0,
        }
    }

    pub fn leaf(keys: Vec<Key>) -> Self {
        let values = keys.clone();
        Node {
            keys,
            values,
            ..Node::new(NodeKind::Leaf)
        }
    }

    pub fn internal(keys: Vec<Key>, children: Vec<NodeId>) -> Self {
        let child_bitmap = vec![false; children.len()];
        Node {
            keys,
            children,
            child_bitmap,
            ..Node::new(NodeKind::Internal)
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Leaf
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_full(&self, capacity: usize) -> bool {
        self.keys.len() >= capacity
    }

    /// Free slots, `C - |keys|`.
    pub fn free_space(&self, capacity: usize) -> usize {
        capacity.saturating_sub(self.keys.len())
    }

    pub fn bitmap_count(&self) -> usize {
        self.child_bitmap.iter().filter(|b| **b).count()
    }

    /// Free space left after reserving one slot per recorded critical child.
    /// Zero means critical, negative would mean unsafe.
    pub fn slack(&self, capacity: usize) -> isize {
        let free = capacity as isize - self.keys.len() as isize;
        match self.kind {
            NodeKind::Leaf => free,
            NodeKind::Internal => free - self.bitmap_count() as isize,
        }
    }

    /// Child position for `key`: the number of separators `<= key`.
    pub fn route(&self, key: Key) -> usize {
        self.keys.partition_point(|k| *k <= key)
    }

    pub fn find_next_node(&self, key: Key) -> NodeId {
        debug_assert!(!self.is_leaf());
        self.children[self.route(key)]
    }

    /// Position of `key` in a leaf: `Ok` if present, `Err(insert_at)` otherwise.
    pub fn search(&self, key: Key) -> std::result::Result<usize, usize> {
        self.keys.binary_search(&key)
    }

    /// Insert or overwrite a leaf entry. Returns true if the key was new.
    pub fn upsert(&mut self, key: Key, value: Payload) -> bool {
        match self.search(key) {
            Ok(i) => {
                self.values[i] = value;
                false
            }
            Err(i) => {
                self.keys.insert(i, key);
                self.values.insert(i, value);
                true
            }
        }
    }

    /// Record a split of child `idx`: `sep` goes in front of the new right
    /// sibling, whose bitmap bit starts clear. Bits after `idx` shift right.
    pub fn insert_separator(&mut self, idx: usize, sep: Key, right: NodeId) {
        self.keys.insert(idx, sep);
        self.children.insert(idx + 1, right);
        self.child_bitmap.insert(idx + 1, false);
    }

    /// Split in place; `self` keeps the lower half.
    ///
    /// Leaves: the right half takes the upper `ceil(n/2)` entries and the
    /// separator is a copy of its first key. Internal: the middle key moves up.
    pub fn split(&mut self) -> Result<(Node, Key)> {
        let n = self.keys.len();
        let right = match self.kind {
            NodeKind::Leaf => {
                if n < 2 {
                    return Err(TreeError::Structural(format!(
                        "cannot split a leaf with {n} keys"
                    )));
                }
                let mid = n / 2;
                let keys = self.keys.split_off(mid);
                let values = self.values.split_off(mid);
                Node {
                    keys,
                    values,
                    ..Node::new(NodeKind::Leaf)
                }
            }
            NodeKind::Internal => {
                if n < MIN_INTERNAL_SPLIT {
                    return Err(TreeError::Structural(format!(
                        "cannot split an internal node with {n} keys"
                    )));
                }
                let mid = n / 2;
                let keys = self.keys.split_off(mid + 1);
                let children = self.children.split_off(mid + 1);
                let child_bitmap = self.child_bitmap.split_off(mid + 1);
                let sep = self.keys.pop().expect("mid key");
                self.critical = false;
                return Ok((
                    Node {
                        keys,
                        children,
                        child_bitmap,
                        ..Node::new(NodeKind::Internal)
                    },
                    sep,
                ));
            }
        };
        self.critical = false;
        let sep = right.keys[0];
        Ok((right, sep))
    }
}
