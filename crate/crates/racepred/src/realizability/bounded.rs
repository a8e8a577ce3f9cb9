//! Realizability with a bounded number of write reversals.
//!
//! A search node is an order `Q` refining the input. The graph `G1` adds to
//! `Q` every `Q`-unordered pair of conflicting writes (or acquires) in trace
//! order, and `G2` adds the read extension: `r → w` when `rf(r) → w` and
//! `w → r` when `w → rf(r)`. An acyclic `G2` linearizes to a realization
//! whose reversals are exactly those already forced by `Q`. Otherwise a
//! cycle with at most `k` non-`Q` edges exists, and every realization of `Q`
//! violates one of them, which fixes one more reversal.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::orders::RfPoset;
use crate::trace_model::Ev;

/// Counters and diagnostics of one bounded search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundedStats {
    /// Search nodes expanded.
    pub nodes: usize,
    /// Largest number of non-order edges on a cycle handed to branching.
    pub max_cycle_cross_edges: usize,
}

/// Outcome of [`realize_bounded`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedOutcome {
    /// A realizing sequence of trace events with at most `ℓ` reversals.
    pub witness: Option<Vec<Ev>>,
    /// Reversed pairs `(a, b)` of the witness, with `a` earlier in the trace.
    pub reversals: Vec<(Ev, Ev)>,
    /// Search counters.
    pub stats: BoundedStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeKind {
    Order,
    Writes,
    ReadBefore,
    WriteBefore,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
    kind: EdgeKind,
}

/// Searches for a realization of `p` with at most `ell` reversals of
/// conflicting write/acquire pairs relative to the source trace. A returned
/// witness always meets the bound; `None` is definitive when `p` is
/// unrealizable.
#[must_use]
pub fn realize_bounded(p: &RfPoset<'_>, ell: usize) -> BoundedOutcome {
    let mut stats = BoundedStats::default();
    let lin = search(p.clone(), ell, &mut stats);
    match lin {
        Some(lin) => {
            let witness: Vec<Ev> = lin.iter().map(|&v| p.event_of(v)).collect();
            let reversals = crate::oracle::reversals(p.trace(), &witness);
            debug_assert!(reversals.len() <= ell);
            BoundedOutcome {
                witness: Some(witness),
                reversals,
                stats,
            }
        }
        None => BoundedOutcome {
            witness: None,
            reversals: Vec::new(),
            stats,
        },
    }
}

fn writer_pairs(q: &RfPoset<'_>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..q.len() {
        if !q.kind(a).is_writer() {
            continue;
        }
        for b in a + 1..q.len() {
            if q.kind(b).is_writer() && q.loc(a) == q.loc(b) {
                out.push((a, b));
            }
        }
    }
    out
}

fn reversed_count(q: &RfPoset<'_>, pairs: &[(usize, usize)]) -> usize {
    pairs.iter().filter(|&&(a, b)| q.order().less(b, a)).count()
}

fn search(q: RfPoset<'_>, ell: usize, stats: &mut BoundedStats) -> Option<Vec<usize>> {
    stats.nodes += 1;
    let q = q.closure()?;
    let pairs = writer_pairs(&q);
    if reversed_count(&q, &pairs) > ell {
        return None;
    }
    let o = q.order();
    let n = q.len();
    let mut edges: Vec<Edge> = Vec::new();
    for b in 0..n {
        for (j, &c) in o.below(b).iter().enumerate() {
            if c > 0 {
                edges.push(Edge {
                    from: o.chains()[j][c as usize - 1],
                    to: b,
                    kind: EdgeKind::Order,
                });
            }
        }
    }
    let unordered_in_trace_order = |a: usize, b: usize| {
        a < b && o.unordered(a, b) && q.kind(a).is_writer() && q.kind(b).is_writer()
    };
    for &(a, b) in &pairs {
        if o.unordered(a, b) {
            edges.push(Edge {
                from: a,
                to: b,
                kind: EdgeKind::Writes,
            });
        }
    }
    let g1 = |a: usize, b: usize| o.less(a, b) || unordered_in_trace_order(a, b);
    for (w, r) in q.read_pairs() {
        let loc = q.loc(r);
        for j in 0..o.width() {
            for &w2 in q.writers_on(loc, j) {
                if w2 == w {
                    continue;
                }
                if g1(w, w2) {
                    edges.push(Edge {
                        from: r,
                        to: w2,
                        kind: EdgeKind::ReadBefore,
                    });
                }
                if g1(w2, w) {
                    edges.push(Edge {
                        from: w2,
                        to: r,
                        kind: EdgeKind::WriteBefore,
                    });
                }
            }
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        adj[e.from].push(i);
    }

    if let Some(lin) = topological(n, &edges, &adj) {
        return Some(lin);
    }
    let cycle = shrink(find_cycle(n, &edges, &adj), &q);
    let cross: Vec<Edge> = cycle
        .iter()
        .copied()
        .filter(|e| e.kind != EdgeKind::Order)
        .collect();
    assert!(
        cross.len() <= o.width(),
        "cycle keeps {} non-order edges over {} chains",
        cross.len(),
        o.width()
    );
    stats.max_cycle_cross_edges = stats.max_cycle_cross_edges.max(cross.len());
    for e in cross {
        let (a, b) = match e.kind {
            EdgeKind::Writes => (e.to, e.from),
            EdgeKind::WriteBefore => (q.rf(e.to).expect("observer has a source"), e.from),
            EdgeKind::ReadBefore => (e.to, q.rf(e.from).expect("observer has a source")),
            EdgeKind::Order => unreachable!(),
        };
        let mut next = q.clone();
        if next.order_mut().insert(a, b).is_err() {
            continue;
        }
        if let Some(lin) = search(next, ell, stats) {
            return Some(lin);
        }
    }
    None
}

fn topological(n: usize, edges: &[Edge], adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    for e in edges {
        indeg[e.to] += 1;
    }
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        out.push(v);
        for &i in &adj[v] {
            let t = edges[i].to;
            indeg[t] -= 1;
            if indeg[t] == 0 {
                heap.push(Reverse(t));
            }
        }
    }
    (out.len() == n).then_some(out)
}

fn find_cycle(n: usize, edges: &[Edge], adj: &[Vec<usize>]) -> Vec<Edge> {
    // 0 = unvisited, 1 = on stack, 2 = done.
    let mut color = vec![0u8; n];
    let mut via: Vec<usize> = vec![usize::MAX; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        color[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let i = adj[v][*next];
                *next += 1;
                let t = edges[i].to;
                match color[t] {
                    0 => {
                        color[t] = 1;
                        via[t] = i;
                        stack.push((t, 0));
                    }
                    1 => {
                        let mut cycle = vec![edges[i]];
                        let mut u = v;
                        while u != t {
                            let e = edges[via[u]];
                            cycle.push(e);
                            u = e.from;
                        }
                        cycle.reverse();
                        return cycle;
                    }
                    _ => {}
                }
            } else {
                color[v] = 2;
                stack.pop();
            }
        }
    }
    unreachable!("find_cycle is only called on cyclic graphs")
}

/// While more than `k` non-order edges remain, two of them start on the same
/// chain; replacing the stretch between them by the chain edge keeps a cycle
/// and drops at least one of them.
fn shrink(mut cycle: Vec<Edge>, q: &RfPoset<'_>) -> Vec<Edge> {
    let o = q.order();
    loop {
        let cross: Vec<usize> = (0..cycle.len())
            .filter(|&i| cycle[i].kind != EdgeKind::Order)
            .collect();
        if cross.len() <= o.width() {
            return cycle;
        }
        let mut found = None;
        'outer: for (x, &p1) in cross.iter().enumerate() {
            for &p2 in &cross[x + 1..] {
                if o.chain_of(cycle[p1].from) == o.chain_of(cycle[p2].from) {
                    found = Some((p1, p2));
                    break 'outer;
                }
            }
        }
        let (p1, p2) = found.expect("pigeonhole over chains");
        let (s1, s2) = (cycle[p1].from, cycle[p2].from);
        cycle = if o.pos_of(s1) < o.pos_of(s2) {
            let mut c = vec![Edge {
                from: s1,
                to: s2,
                kind: EdgeKind::Order,
            }];
            c.extend_from_slice(&cycle[p2..]);
            c.extend_from_slice(&cycle[..p1]);
            c
        } else {
            let mut c = cycle[p1..p2].to_vec();
            c.push(Edge {
                from: s2,
                to: s1,
                kind: EdgeKind::Order,
            });
            c
        };
    }
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
    fn observed_order_needs_no_reversal() {
        let t = parse_trace("t1 w x\nt2 w x\nt2 r x\nt1 w y").unwrap();
        let out = realize_bounded(&canonical(&Ideal::full(&t)), 0);
        assert_eq!(out.witness, Some(vec![0, 1, 2, 3]));
        assert!(out.reversals.is_empty());
    }

    #[test]
    fn one_reversal_when_sections_swap() {
        let t = parse_trace("t1 acq l\nt1 w x\nt1 rel l\nt2 acq l\nt2 rel l\nt2 w x").unwrap();
        let x = Ideal::from_cut(&t, vec![1, 2]).unwrap();
        let p = canonical(&x);
        assert!(realize_bounded(&p, 0).witness.is_none());
        let out = realize_bounded(&p, 1);
        assert_eq!(out.witness, Some(vec![3, 4, 0]));
        assert_eq!(out.reversals, vec![(0, 3)]);
    }

    #[test]
    fn unrealizable_for_every_budget() {
        let t = parse_trace("t1 w x\nt2 w x\nt1 r x").unwrap();
        let mut p = RfPoset::from_cut(&t, &[2, 1]);
        p.order_mut().insert(1, 0).unwrap();
        for ell in 0..3 {
            assert!(realize_bounded(&p, ell).witness.is_none());
        }
    }
}
