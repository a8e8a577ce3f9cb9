//! Realizability backends for rf-posets: the ideal-graph search, the closure
//! construction for tree-inducible inputs, and the reversal-bounded search.

mod bounded;
mod general;
mod tree;

pub use bounded::{realize_bounded, BoundedOutcome, BoundedStats};
pub use general::{realize_general, GeneralOutcome, GeneralStats};
pub use tree::{check_tree_inducible, realize_tree, TreeError, TreeOutcome, TreePartition};
