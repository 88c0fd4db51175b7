//! In-memory node store with per-operation I/O accounting.
//!
//! Each operation starts with an empty buffer. The first fetch of a node
//! costs one read; every node dirtied during the operation costs one write
//! when the operation ends. Allocated nodes start resident and dirty.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};
use crate::node::{Node, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoReport {
    pub reads: u64,
    pub writes: u64,
    pub total: u64,
}

impl IoReport {
    pub fn new(reads: u64, writes: u64) -> Self {
        IoReport {
            reads,
            writes,
            total: reads + writes,
        }
    }
}

/// Nodes touched by the operation in flight. Paths are short, so plain
/// vectors beat hashing here.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpBuffer {
    pub resident: Vec<NodeId>,
    pub dirty: Vec<NodeId>,
    pub reads: u64,
}

impl OpBuffer {
    pub fn is_resident(&self, id: NodeId) -> bool {
        self.resident.contains(&id)
    }

    pub fn is_dirty(&self, id: NodeId) -> bool {
        self.dirty.contains(&id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Pager {
    nodes: Vec<Node>,
    buf: Option<OpBuffer>,
}

impl Pager {
    pub fn new() -> Self {
        Pager::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn in_op(&self) -> bool {
        self.buf.is_some()
    }

    pub fn buffer(&self) -> Option<&OpBuffer> {
        self.buf.as_ref()
    }

    pub fn begin_op(&mut self) -> Result<&OpBuffer> {
        if self.buf.is_some() {
            return Err(TreeError::Protocol(
                "begin_op while an operation is in flight".into(),
            ));
        }
        Ok(self.buf.insert(OpBuffer::default()))
    }

    fn buf_mut(&mut self) -> Result<&mut OpBuffer> {
        self.buf
            .as_mut()
            .ok_or_else(|| TreeError::Protocol("no operation in flight".into()))
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(TreeError::UnknownNode(id))
        }
    }

    /// Bring `id` into the buffer, charging a read on first access.
    pub fn fetch(&mut self, id: NodeId) -> Result<&Node> {
        self.check(id)?;
        let buf = self.buf_mut()?;
        if !buf.is_resident(id) {
            buf.resident.push(id);
            buf.reads += 1;
        }
        Ok(&self.nodes[id.index()])
    }

    pub fn mark_dirty(&mut self, id: NodeId) -> Result<()> {
        self.check(id)?;
        let buf = self.buf_mut()?;
        if !buf.is_resident(id) {
            return Err(TreeError::Protocol(format!(
                "dirtying non-resident node {id:?}"
            )));
        }
        if !buf.is_dirty(id) {
            buf.dirty.push(id);
        }
        Ok(())
    }

    /// Mutable access to a resident node; marks it dirty.
    pub fn write(&mut self, id: NodeId) -> Result<&mut Node> {
        self.mark_dirty(id)?;
        Ok(&mut self.nodes[id.index()])
    }

    /// Like [`Pager::write`] but skips the dirty mark when `f` reports no change.
    pub fn update<F: FnOnce(&mut Node) -> bool>(&mut self, id: NodeId, f: F) -> Result<bool> {
        self.check(id)?;
        if !self.buf_mut()?.is_resident(id) {
            return Err(TreeError::Protocol(format!(
                "updating non-resident node {id:?}"
            )));
        }
        let changed = f(&mut self.nodes[id.index()]);
        if changed {
            self.mark_dirty(id)?;
        }
        Ok(changed)
    }

    pub fn allocate(&mut self, kind: NodeKind) -> Result<NodeId> {
        self.allocate_node(Node::new(kind))
    }

    /// Allocate with initial content. The new page is resident and dirty.
    pub fn allocate_node(&mut self, node: Node) -> Result<NodeId> {
        let id = NodeId(
            u32::try_from(self.nodes.len())
                .map_err(|_| TreeError::Structural("node id space exhausted".into()))?,
        );
        let buf = self.buf_mut()?;
        buf.resident.push(id);
        buf.dirty.push(id);
        self.nodes.push(node);
        Ok(id)
    }

    pub fn end_op(&mut self) -> Result<IoReport> {
        let buf = self
            .buf
            .take()
            .ok_or_else(|| TreeError::Protocol("end_op without begin_op".into()))?;
        for id in &buf.dirty {
            self.nodes[id.index()].version += 1;
        }
        Ok(IoReport::new(buf.reads, buf.dirty.len() as u64))
    }

    /// Drop the operation without reporting (error paths).
    pub fn abort_op(&mut self) {
        self.buf = None;
    }

    /// Unaccounted read access for verification and oracles.
    pub fn peek(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    /// Unaccounted mutable access. Only for building fixtures and fault injection.
    pub fn peek_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(id.index())
    }

    /// Store a node outside any operation (tree construction).
    pub fn install(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() as u32 - 1)
    }
}
