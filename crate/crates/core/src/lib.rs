//! Frequent itemset mining over pluggable dataflow backends.
//!
//! The crate is organized in three layers:
//!
//! * **Mining algorithms** — [`apriori`] (level-wise candidate generation)
//!   and [`fpgrowth`] (two-scan FP-tree mining). These run single-threaded
//!   against a [`datasets::TransactionDatabase`].
//! * **Execution substrate** — [`mapreduce`] provides a small map/shuffle/
//!   reduce engine with four interchangeable backends that model the cost
//!   profiles of batch-materializing, in-memory iterative, and pipelined
//!   dataflow systems (plus a plain sequential reference). [`parallel`]
//!   expresses the distributed variants of both miners (MR-Apriori and
//!   parallel FP-Growth) as stages on that substrate.
//! * **Measurement** — [`bench`] runs mining cells over a config grid,
//!   verifies results against a brute-force oracle where feasible, and
//!   renders CSV tables and SVG charts.
//!
//! All mining entry points produce a [`itemset::MiningResult`] whose
//! frequent-pattern map is keyed by [`itemset::Itemset`] in canonical order
//! (shorter sets first, then lexicographic), so results from different
//! algorithms and backends compare with plain `==`.

pub mod apriori;
pub mod bench;
pub mod datasets;
pub mod error;
pub mod fpgrowth;
pub mod itemset;
pub mod mapreduce;
pub mod parallel;

mod util;

pub use error::{FimError, Result};
