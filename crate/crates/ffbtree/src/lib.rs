//! B+-tree insertion with bounded per-insert I/O.
//!
//! Three insert algorithms share one node layout and one page accounting
//! model ([`Pager`]): the textbook bottom-up split cascade
//! ([`Variant::Baseline`]), top-down preemptive splitting of full nodes
//! ([`Variant::Clrs`]), and [`Variant::Ff`], which tracks which subtrees are
//! one insert away from splitting and performs at most one split per insert.
//! Every insert returns an [`InsertReport`] with its reads, writes and
//! splits; the distance of its total from the `height + 1` floor is the
//! insert's fluctuation.
//!
//! ```
//! use ffbtree::{Tree, Variant};
//!
//! let mut t = Tree::with_capacity(8, Variant::Ff)?;
//! for k in 0..10_000 {
//!     let r = t.insert(k, k)?;
//!     assert!(r.splits <= 1);
//! }
//! assert_eq!(t.lookup(42)?, Some(42));
//! # Ok::<(), ffbtree::TreeError>(())
//! ```
//!
//! Modules:
//! - [`workload`]: sequential, uniform, Zipfian and CLRS-adversary key streams, keyfiles
//! - [`metrics`]: per-height stats, CCDF, top-k, binned maxima, windowed range, utilization
//! - [`olc`]: optimistic concurrent inserts with injected latency
//! - [`experiment`]: the matrix runner behind the `ffbench` binary
//!
//! Examples, one per capability:
//!
//! ```text
//! cargo run --example io_accounting           # read/write counting, the H+1 floor
//! cargo run --example worst_case_insert       # the 3H+1 full-path insert
//! cargo run --example sequential_fluctuation  # per-height cost, all variants
//! cargo run --example clrs_adversary          # adaptive stream against CLRS, replayed into ff
//! cargo run --example critical_state          # flags, bitmaps and the classification oracle
//! cargo run --example workload_generators     # key streams and keyfiles
//! cargo run --example concurrent_inserts      # actor sweep with restarts and latency ranges
//! cargo run --example experiment_config       # JSON-driven runs and their artifacts
//! cargo run --example tail_metrics            # CCDF, peaks, binned maxima
//! cargo run --example utilization             # node occupancy of early splitting
//! ```

pub mod baseline;
pub mod error;
pub mod experiment;
pub mod ff;
pub mod metrics;
pub mod node;
pub mod olc;
pub mod pager;
pub mod store;
pub mod tree;
pub mod workload;

pub use error::{Result, TreeError};
pub use ff::{DescentContext, NodeClass};
pub use node::{Key, Node, NodeId, NodeKind, Payload};
pub use pager::{IoReport, OpBuffer, Pager};
pub use tree::{InsertReport, Shape, Tree, TreeConfig, Variant, Violation};
