//! The full-path insert: every node from leaf to root is full, so a
//! bottom-up split cascade costs `3H + 1` I/Os. CLRS pays the same on the
//! way down.

use ffbtree::{Shape, Tree, TreeConfig, Variant};

fn full_path() -> Shape {
    let leaf = |k: &[u64]| Shape::Leaf(k.to_vec());
    Shape::Internal(
        vec![100, 200, 300],
        vec![
            Shape::Internal(
                vec![10, 20, 30],
                vec![leaf(&[1, 2, 3]), leaf(&[10]), leaf(&[20]), leaf(&[30])],
            ),
            Shape::Internal(vec![150], vec![leaf(&[100]), leaf(&[150])]),
            Shape::Internal(vec![250], vec![leaf(&[200]), leaf(&[250])]),
            Shape::Internal(vec![350], vec![leaf(&[300]), leaf(&[350])]),
        ],
    )
}

pub fn run_example() -> anyhow::Result<()> {
    for v in [Variant::Baseline, Variant::Clrs] {
        let mut t = Tree::from_shape(TreeConfig::new(3, v), &full_path())?;
        let h = t.height();
        let r = t.insert(4, 4)?;
        println!(
            "{v:<8} H={h}: total {} = 3H+1, splits {}, height now {}",
            r.total,
            r.splits,
            t.height()
        );
        assert_eq!(r.total, 3 * h as u64 + 1);
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
