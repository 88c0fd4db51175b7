//! The node access the insert algorithms need, so the same code runs on the
//! accounted single-threaded tree and on private copies inside an optimistic
//! concurrent operation.

use crate::error::Result;
use crate::node::{Key, Node, NodeId};
use crate::tree::Tree;

pub trait NodeStore {
    fn capacity(&self) -> usize;
    fn root(&mut self) -> Result<NodeId>;
    fn height(&mut self) -> Result<usize>;
    /// Read access; the first access of a node in an operation costs a read.
    fn fetch(&mut self, id: NodeId) -> Result<&Node>;
    /// Write access; the node becomes dirty.
    fn write(&mut self, id: NodeId) -> Result<&mut Node>;
    /// Run `f` on the node and mark it dirty only if `f` reports a change.
    fn update(&mut self, id: NodeId, f: &mut dyn FnMut(&mut Node) -> bool) -> Result<bool>;
    fn allocate(&mut self, node: Node) -> Result<NodeId>;
    /// Install a fresh root above the current one with `right` as its second child.
    fn grow_root(&mut self, sep: Key, right: NodeId) -> Result<NodeId>;
}

/// Root-to-leaf path for `key`.
pub fn descend<S: NodeStore + ?Sized>(s: &mut S, key: Key) -> Result<Vec<NodeId>> {
    let mut path = Vec::new();
    let mut cur = s.root()?;
    loop {
        path.push(cur);
        let node = s.fetch(cur)?;
        if node.is_leaf() {
            return Ok(path);
        }
        cur = node.find_next_node(key);
    }
}

/// Outcome of one insert run against a store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Applied {
    pub splits: u32,
    /// False when the key was already present and only its payload changed.
    pub new_key: bool,
}

impl NodeStore for Tree {
    fn capacity(&self) -> usize {
        self.config.capacity
    }

    fn root(&mut self) -> Result<NodeId> {
        Ok(self.root)
    }

    fn height(&mut self) -> Result<usize> {
        Ok(self.height)
    }

    fn fetch(&mut self, id: NodeId) -> Result<&Node> {
        self.pager.fetch(id)
    }

    fn write(&mut self, id: NodeId) -> Result<&mut Node> {
        self.pager.write(id)
    }

    fn update(&mut self, id: NodeId, f: &mut dyn FnMut(&mut Node) -> bool) -> Result<bool> {
        self.pager.update(id, f)
    }

    fn allocate(&mut self, node: Node) -> Result<NodeId> {
        self.pager.allocate_node(node)
    }

    fn grow_root(&mut self, sep: Key, right: NodeId) -> Result<NodeId> {
        let root = Node::internal(vec![sep], vec![self.root, right]);
        let id = self.pager.allocate_node(root)?;
        self.root = id;
        self.height += 1;
        Ok(id)
    }
}
