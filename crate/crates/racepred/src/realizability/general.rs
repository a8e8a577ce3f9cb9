//! Realizability by breadth-first search over the ideal graph.
//!
//! The search runs on the closure of the input, whose realizing
//! linearizations are exactly those of the input. A state is the explored
//! ideal, stored as per-chain prefix lengths, together with the number of
//! frontier pairs per location.

use std::collections::{HashMap, VecDeque};

use crate::orders::RfPoset;
use crate::trace_model::Ev;

/// Counters and diagnostics of one general search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneralStats {
    /// Ideals discovered by the search.
    pub visited: usize,
    /// Order edges inserted by the closure.
    pub closure_edges: usize,
    /// Frontier size before each step of the returned witness.
    pub frontier_sizes: Vec<usize>,
}

/// Outcome of [`realize_general`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralOutcome {
    /// The canonical trace of the full ideal, when it is reachable.
    pub witness: Option<Vec<Ev>>,
    /// Search counters.
    pub stats: GeneralStats,
}

struct Node {
    cut: Vec<u32>,
    pending: Vec<u32>,
    parent: usize,
    event: usize,
}

/// Decides realizability of `p` and returns a realizing sequence of trace
/// events when one exists.
#[must_use]
pub fn realize_general(p: &RfPoset<'_>) -> GeneralOutcome {
    let (closed, closure_edges) = p.closure_counted();
    let mut stats = GeneralStats {
        closure_edges,
        ..GeneralStats::default()
    };
    let Some(q) = closed else {
        return GeneralOutcome {
            witness: None,
            stats,
        };
    };
    let o = q.order();
    let k = o.width();
    let locs = q.trace().loc_count();
    let mut readers = vec![0u32; q.len()];
    for (w, _) in q.read_pairs() {
        readers[w] += 1;
    }
    let total_writers: Vec<usize> = (0..locs)
        .map(|l| (0..k).map(|j| q.writers_on(l, j).len()).sum())
        .collect();
    let full: Vec<u32> = o.chains().iter().map(|c| c.len() as u32).collect();
    let state_bound: u128 = full.iter().map(|&c| c as u128 + 1).product();

    let executable = |cut: &[u32], v: usize| o.below(v).iter().zip(cut).all(|(b, c)| b <= c);
    let unexecuted_writers = |cut: &[u32], loc: usize| -> usize {
        let done: usize = (0..k)
            .map(|j| {
                q.writers_on(loc, j)
                    .partition_point(|&w| (o.pos_of(w) as u32) < cut[j])
            })
            .sum();
        total_writers[loc] - done
    };
    let moves = |cut: &[u32], pending: &[u32]| -> Vec<usize> {
        let mut out = Vec::new();
        for j in 0..k {
            let Some(&v) = o.chains()[j].get(cut[j] as usize) else {
                continue;
            };
            if !executable(cut, v) {
                continue;
            }
            let kind = q.kind(v);
            let loc = q.loc(v);
            if kind.is_writer() && pending[loc] > 0 {
                continue;
            }
            let eager = !kind.is_writer() || unexecuted_writers(cut, loc) == 1;
            if eager {
                return vec![v];
            }
            out.push(v);
        }
        out
    };

    let mut arena = vec![Node {
        cut: vec![0; k],
        pending: vec![0; locs],
        parent: usize::MAX,
        event: usize::MAX,
    }];
    let mut index: HashMap<Vec<u32>, usize> = HashMap::from([(vec![0; k], 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut goal = None;
    while let Some(i) = queue.pop_front() {
        if arena[i].cut == full {
            goal = Some(i);
            break;
        }
        for v in moves(&arena[i].cut, &arena[i].pending) {
            let mut cut = arena[i].cut.clone();
            cut[o.chain_of(v)] += 1;
            if index.contains_key(&cut) {
                continue;
            }
            let mut pending = arena[i].pending.clone();
            let loc = q.loc(v);
            if q.kind(v).is_observer() {
                pending[loc] -= 1;
            } else {
                pending[loc] += readers[v];
            }
            index.insert(cut.clone(), arena.len());
            queue.push_back(arena.len());
            arena.push(Node {
                cut,
                pending,
                parent: i,
                event: v,
            });
        }
    }
    stats.visited = arena.len();
    assert!(
        stats.visited as u128 <= state_bound,
        "ideal graph exceeded its node bound"
    );
    let Some(mut i) = goal else {
        return GeneralOutcome {
            witness: None,
            stats,
        };
    };
    let mut path = Vec::new();
    while arena[i].parent != usize::MAX {
        path.push(i);
        i = arena[i].parent;
    }
    path.reverse();
    let mut witness = Vec::with_capacity(path.len());
    for &i in &path {
        let parent = &arena[arena[i].parent];
        stats
            .frontier_sizes
            .push(parent.pending.iter().map(|&c| c as usize).sum());
        witness.push(q.event_of(arena[i].event));
    }
    GeneralOutcome {
        witness: Some(witness),
        stats,
    }
}
