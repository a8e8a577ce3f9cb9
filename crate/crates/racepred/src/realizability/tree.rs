//! Realizability of tree-inducible rf-posets through their closure.

use thiserror::Error;

use crate::orders::{PartialOrder, RfPoset};
use crate::trace_model::{forest_shape, Ev};

/// The per-thread partition of an rf-poset and its conflict forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePartition {
    /// Node lists of each block, in chain order.
    pub blocks: Vec<Vec<usize>>,
    /// Conflict edges between non-empty blocks, as `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
}

impl TreePartition {
    /// Neighbors of block `i`.
    #[must_use]
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// The path of blocks from `i` to `j`, inclusive, if they are connected.
    #[must_use]
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let k = self.blocks.len();
        let mut parent = vec![usize::MAX; k];
        let mut stack = vec![i];
        parent[i] = i;
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u) {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        if parent[j] == usize::MAX {
            return None;
        }
        let mut path = vec![j];
        let mut u = j;
        while u != i {
            u = parent[u];
            path.push(u);
        }
        path.reverse();
        Some(path)
    }
}

fn conflict_edges(p: &RfPoset<'_>) -> Vec<(usize, usize)> {
    let k = p.order().width();
    let locs = p.trace().loc_count();
    let mut writes = vec![vec![false; k]; locs];
    let mut uses = vec![vec![false; k]; locs];
    for v in 0..p.len() {
        let j = p.order().chain_of(v);
        uses[p.loc(v)][j] = true;
        if p.kind(v).is_writer() {
            writes[p.loc(v)][j] = true;
        }
    }
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if (0..locs).any(|l| (writes[l][i] && uses[l][j]) || (uses[l][i] && writes[l][j])) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Partitions `p` by thread and checks the tree-inducibility conditions:
/// the conflict graph of the non-empty blocks is a forest, no order crosses
/// between its components, and every order between blocks `i` and `j` passes
/// through each internal block on the path between them.
#[must_use]
pub fn check_tree_inducible(p: &RfPoset<'_>) -> Option<TreePartition> {
    let o = p.order();
    let k = o.width();
    let edges = conflict_edges(p);
    let (acyclic, _) = forest_shape(k, &edges);
    if !acyclic {
        return None;
    }
    let tp = TreePartition {
        blocks: o.chains().to_vec(),
        edges,
    };
    let paths: Vec<Vec<Option<Vec<usize>>>> = (0..k)
        .map(|i| (0..k).map(|j| tp.path(i, j)).collect())
        .collect();
    for i in 0..k {
        for &e1 in &tp.blocks[i] {
            for j in 0..k {
                if j == i {
                    continue;
                }
                let first = o.above(e1)[j] as usize;
                let Some(&e2) = tp.blocks[j].get(first) else {
                    continue;
                };
                let path = paths[i][j].as_ref()?;
                for &l in &path[1..path.len() - 1] {
                    if o.above(e1)[l] >= o.below(e2)[l] {
                        return None;
                    }
                }
            }
        }
    }
    Some(tp)
}

/// Failures of the tree construction on inputs that violate its premise.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// The partition does not describe the rf-poset.
    #[error("the partition does not match the rf-poset")]
    PartitionMismatch,
    /// The top-down ordering closed a cycle or did not realize the input.
    #[error("the tree construction did not produce a realizing order")]
    Construction,
}

/// Outcome of [`realize_tree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeOutcome {
    /// A realizing sequence of trace events, when the closure exists.
    pub witness: Option<Vec<Ev>>,
    /// Order edges inserted by the closure.
    pub closure_edges: usize,
}

/// Realizes a tree-inducible rf-poset: computes its closure, then walks the
/// conflict forest top-down and orders each parent event before every
/// conflicting child event not already below it, and linearizes.
pub fn realize_tree(p: &RfPoset<'_>, tp: &TreePartition) -> Result<TreeOutcome, TreeError> {
    if tp.blocks.as_slice() != p.order().chains() {
        return Err(TreeError::PartitionMismatch);
    }
    let (closed, closure_edges) = p.closure_counted();
    let Some(q) = closed else {
        return Ok(TreeOutcome {
            witness: None,
            closure_edges,
        });
    };
    let k = tp.blocks.len();
    let locs = q.trace().loc_count();
    let mut on_loc = vec![vec![Vec::new(); k]; locs];
    for (j, block) in tp.blocks.iter().enumerate() {
        for &v in block {
            on_loc[q.loc(v)][j].push(v);
        }
    }
    let mut order: PartialOrder = q.order().clone();
    let mut seen = vec![false; k];
    for root in 0..k {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            for j in tp.neighbors(i) {
                if seen[j] {
                    continue;
                }
                seen[j] = true;
                stack.push(j);
                for &e1 in &tp.blocks[i] {
                    let loc = q.loc(e1);
                    let start = order.below(e1)[j] as usize;
                    let writer = q.kind(e1).is_writer();
                    let e2 = on_loc[loc][j]
                        .iter()
                        .copied()
                        .filter(|&v| writer || q.kind(v).is_writer())
                        .find(|&v| order.pos_of(v) >= start);
                    if let Some(e2) = e2 {
                        order.insert(e1, e2).map_err(|_| TreeError::Construction)?;
                    }
                }
            }
        }
    }
    let lin = order.linearize();
    if !q.realized_by(&lin) {
        return Err(TreeError::Construction);
    }
    Ok(TreeOutcome {
        witness: Some(lin.into_iter().map(|v| q.event_of(v)).collect()),
        closure_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal_engine::{feasibility, Feasibility, Ideal};
    use crate::trace_model::parse_trace;

    fn canonical<'t>(x: &Ideal<'t>) -> RfPoset<'t> {
        match feasibility(x) {
            Feasibility::Feasible(p) => p,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_threads_are_tree_inducible() {
        let t = parse_trace("t1 w x\nt1 w y\nt2 r y\nt2 w x").unwrap();
        let p = canonical(&Ideal::full(&t));
        let tp = check_tree_inducible(&p).unwrap();
        assert_eq!(tp.edges, vec![(0, 1)]);
        let out = realize_tree(&p, &tp).unwrap();
        let w = out.witness.unwrap();
        let lin: Vec<usize> = w.iter().map(|&e| p.node_of(e).unwrap()).collect();
        assert!(p.realized_by(&lin));
    }

    #[test]
    fn triangle_is_not_tree_inducible() {
        let t = parse_trace("t1 w x\nt2 w x\nt2 w y\nt3 w y\nt3 w z\nt1 w z").unwrap();
        let p = canonical(&Ideal::full(&t));
        assert!(check_tree_inducible(&p).is_none());
    }

    #[test]
    fn order_must_pass_through_middle_block() {
        // Conflicts form the path t1 - t2 - t3.
        let t = parse_trace("t1 w x\nt2 r x\nt2 w y\nt3 r y\nt3 w q\nt1 w p").unwrap();
        let p = canonical(&Ideal::full(&t));
        assert!(check_tree_inducible(&p).is_some());
        // Ordering t1's last event before t3's last one skips t2 entirely.
        let mut order = p.order().clone();
        order
            .insert(p.node_of(5).unwrap(), p.node_of(4).unwrap())
            .unwrap();
        assert!(check_tree_inducible(&p.with_order(order)).is_none());
    }

    #[test]
    fn closure_bottom_gives_no_witness() {
        let t = parse_trace("t1 w x\nt2 w x\nt1 r x").unwrap();
        let mut p = RfPoset::from_cut(&t, &[2, 1]);
        p.order_mut().insert(1, 0).unwrap();
        let tp = check_tree_inducible(&p).unwrap();
        assert_eq!(realize_tree(&p, &tp).unwrap().witness, None);
    }
}
