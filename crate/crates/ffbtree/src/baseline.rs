//! The two comparison algorithms: bottom-up split propagation and top-down
//! preemptive splitting of every full node met on the way down.

use crate::error::Result;
use crate::node::{Key, NodeId, Payload};
use crate::store::{descend, Applied, NodeStore};

/// Insert into the leaf, then split upward for as long as a node overflows.
///
/// The overflowing node briefly holds `C + 1` entries inside the
/// operation, so the halves are exactly those of splitting the over-full
/// state.
pub fn baseline_insert<S: NodeStore + ?Sized>(
    s: &mut S,
    key: Key,
    payload: Payload,
) -> Result<Applied> {
    let cap = s.capacity();
    let path = descend(s, key)?;
    let mut level = path.len() - 1;
    let mut cur = path[level];
    let new_key = s.write(cur)?.upsert(key, payload);
    let mut splits = 0;
    while s.fetch(cur)?.len() > cap {
        let (right, sep) = s.write(cur)?.split()?;
        let right = s.allocate(right)?;
        splits += 1;
        if level == 0 {
            s.grow_root(sep, right)?;
            break;
        }
        level -= 1;
        cur = path[level];
        let parent = s.write(cur)?;
        let idx = parent.route(key);
        parent.insert_separator(idx, sep, right);
    }
    Ok(Applied { splits, new_key })
}

/// Split every full node on the way down, starting with a full root.
/// The leaf insert then never propagates.
pub fn clrs_insert<S: NodeStore + ?Sized>(
    s: &mut S,
    key: Key,
    payload: Payload,
) -> Result<Applied> {
    let cap = s.capacity();
    let mut splits = 0;
    let root = s.root()?;
    if s.fetch(root)?.is_full(cap) {
        let (right, sep) = s.write(root)?.split()?;
        let right = s.allocate(right)?;
        s.grow_root(sep, right)?;
        splits += 1;
    }
    let mut cur = s.root()?;
    loop {
        let node = s.fetch(cur)?;
        if node.is_leaf() {
            let new_key = s.write(cur)?.upsert(key, payload);
            return Ok(Applied { splits, new_key });
        }
        let idx = node.route(key);
        let child: NodeId = node.children[idx];
        if s.fetch(child)?.is_full(cap) {
            let (right, sep) = s.write(child)?.split()?;
            let right = s.allocate(right)?;
            s.write(cur)?.insert_separator(idx, sep, right);
            splits += 1;
            cur = if key >= sep { right } else { child };
        } else {
            cur = child;
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::tree::{Shape, Tree, TreeConfig, Variant};

    /// Height-3 tree at C=3 whose leftmost parent and leaf are full, and
    /// optionally the root too.
    fn left_path(root_full: bool) -> Shape {
        let leaf = |k: &[u64]| Shape::Leaf(k.to_vec());
        let (keys, last) = if root_full {
            (vec![100, 200, 300], 4)
        } else {
            (vec![100, 200], 3)
        };
        Shape::Internal(
            keys,
            vec![
                Shape::Internal(
                    vec![10, 20, 30],
                    vec![leaf(&[1, 2, 3]), leaf(&[10]), leaf(&[20]), leaf(&[30])],
                ),
                Shape::Internal(vec![150], vec![leaf(&[100]), leaf(&[150])]),
                Shape::Internal(vec![250], vec![leaf(&[200]), leaf(&[250])]),
                Shape::Internal(vec![350], vec![leaf(&[300]), leaf(&[350])]),
            ]
            .into_iter()
            .take(last)
            .collect(),
        )
    }

    fn check_full_path_insert(variant: Variant) {
        let cfg = TreeConfig::new(3, variant);
        let mut t = Tree::from_shape(cfg, &left_path(false)).unwrap();
        let r = t.insert(151, 0).unwrap();
        assert_eq!(
            (r.total, r.splits, r.fluctuation),
            (4, 0, 0),
            "non-full path"
        );
        let mut t = Tree::from_shape(cfg, &left_path(true)).unwrap();
        let r = t.insert(4, 0).unwrap();
        assert_eq!((r.reads, r.writes, r.total, r.splits), (3, 7, 10, 3));
        assert_eq!(r.fluctuation, 6);
        assert_eq!(t.height(), 4);
        assert!(t.check_structure().is_empty());
        assert_eq!(t.lookup(4).unwrap(), Some(0));
    }

    #[test]
    fn baseline_full_path_costs_3h_plus_1() {
        check_full_path_insert(Variant::Baseline);
    }

    #[test]
    fn clrs_full_path_costs_3h_plus_1() {
        check_full_path_insert(Variant::Clrs);
    }

    #[test]
    fn fourth_insert_splits_root_leaf_at_c3() {
        let mut t = Tree::with_capacity(3, Variant::Baseline).unwrap();
        for k in 1..=3 {
            let r = t.insert(k, k).unwrap();
            assert_eq!((r.splits, r.total), (0, 2));
        }
        let r = t.insert(4, 4).unwrap();
        assert_eq!(r.splits, 1);
        assert_eq!(r.height, 1);
        assert_eq!(t.height(), 2);
        let root = t.node(t.root()).unwrap();
        assert_eq!(root.keys, vec![3]);
        assert_eq!(t.scan_all(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn clrs_full_root_only_splits_once_before_descent() {
        let leaf = |k: &[u64]| Shape::Leaf(k.to_vec());
        let shape = Shape::Internal(
            vec![10, 20, 30],
            vec![leaf(&[1]), leaf(&[10]), leaf(&[20]), leaf(&[30])],
        );
        let mut t = Tree::from_shape(TreeConfig::new(3, Variant::Clrs), &shape).unwrap();
        let r = t.insert(2, 2).unwrap();
        assert_eq!(r.splits, 1);
        assert_eq!(t.height(), 3);
        assert_eq!(t.node(t.root()).unwrap().keys, vec![20]);
        // root, sibling, new root and the leaf; two reads
        assert_eq!((r.reads, r.writes), (2, 4));
    }

    #[test]
    fn clrs_splits_full_node_even_without_overflow() {
        let mut t = Tree::with_capacity(3, Variant::Clrs).unwrap();
        for k in [1, 2, 3] {
            t.insert(k, k).unwrap();
        }
        // root leaf is full; the next insert splits it first
        let r = t.insert(0, 0).unwrap();
        assert_eq!(r.splits, 1);
        assert_eq!(t.height(), 2);
    }

    #[test]
    fn duplicate_overwrites_payload() {
        for v in Variant::ALL {
            let mut t = Tree::with_capacity(4, v).unwrap();
            t.insert(7, 1).unwrap();
            let r = t.insert(7, 2).unwrap();
            assert_eq!(r.splits, 0);
            assert_eq!(t.len(), 1);
            assert_eq!(t.lookup(7).unwrap(), Some(2));
        }
    }
}
