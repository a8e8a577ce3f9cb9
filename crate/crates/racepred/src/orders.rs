//! Partial orders, rf-posets, and the closure fixpoint.
//!
//! Every order handled here contains a fixed set of chains (the threads) that
//! are totally ordered. This makes the order representable by two width-`k`
//! vectors per node:
//!
//! - `below[v][j]`: how many nodes of chain `j` are strictly below `v`;
//! - `above[v][j]`: the position of the first node of chain `j` strictly
//!   above `v`, or the chain length when there is none.
//!
//! Both vectors are exact because the down-set (up-set) of any node meets
//! every chain in a prefix (suffix). Reachability queries are O(1) and edge
//! insertion touches only the nodes whose vectors actually change.

use thiserror::Error;

use crate::trace_model::{Ev, Kind, Trace};

/// Raised when an insertion would make the order cyclic.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("ordering {0} before {1} closes a cycle")]
pub struct CycleError(pub usize, pub usize);

/// A strict partial order over nodes `0..n` that contains a set of chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialOrder {
    chains: Vec<Vec<usize>>,
    chain_of: Vec<usize>,
    pos_of: Vec<usize>,
    below: Vec<u32>,
    above: Vec<u32>,
}

impl PartialOrder {
    /// The order consisting of the given chains only. Every node `0..n` must
    /// appear in exactly one chain.
    ///
    /// # Panics
    ///
    /// Panics if the chains do not partition `0..n`.
    #[must_use]
    pub fn new(chains: Vec<Vec<usize>>) -> Self {
        let n: usize = chains.iter().map(Vec::len).sum();
        let k = chains.len();
        let mut chain_of = vec![usize::MAX; n];
        let mut pos_of = vec![0; n];
        for (j, ch) in chains.iter().enumerate() {
            for (p, &v) in ch.iter().enumerate() {
                assert!(
                    v < n && chain_of[v] == usize::MAX,
                    "chains must partition the nodes"
                );
                chain_of[v] = j;
                pos_of[v] = p;
            }
        }
        let mut below = vec![0u32; n * k];
        let mut above = vec![0u32; n * k];
        for v in 0..n {
            for j in 0..k {
                above[v * k + j] = chains[j].len() as u32;
            }
            below[v * k + chain_of[v]] = pos_of[v] as u32;
            above[v * k + chain_of[v]] = pos_of[v] as u32 + 1;
        }
        PartialOrder {
            chains,
            chain_of,
            pos_of,
            below,
            above,
        }
    }

    /// The transitive closure of the chains together with `edges`.
    pub fn from_edges(
        chains: Vec<Vec<usize>>,
        edges: &[(usize, usize)],
    ) -> Result<Self, CycleError> {
        let mut po = PartialOrder::new(chains);
        let n = po.len();
        let k = po.width();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for ch in &po.chains {
            for w in ch.windows(2) {
                succ[w[0]].push(w[1]);
                indeg[w[1]] += 1;
            }
        }
        for &(a, b) in edges {
            if a == b {
                return Err(CycleError(a, b));
            }
            succ[a].push(b);
            indeg[b] += 1;
        }
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        while let Some(v) = stack.pop() {
            order.push(v);
            for &s in &succ[v] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    stack.push(s);
                }
            }
        }
        if order.len() < n {
            let v = (0..n).find(|&v| indeg[v] > 0).unwrap_or(0);
            return Err(CycleError(v, v));
        }
        for &v in &order {
            for &s in &succ[v] {
                let cv = po.chain_of[v];
                for j in 0..k {
                    let mut x = po.below[v * k + j];
                    if j == cv {
                        x = x.max(po.pos_of[v] as u32 + 1);
                    }
                    if po.below[s * k + j] < x {
                        po.below[s * k + j] = x;
                    }
                }
            }
        }
        for &v in order.iter().rev() {
            for &s in &succ[v] {
                let cs = po.chain_of[s];
                for j in 0..k {
                    let mut x = po.above[s * k + j];
                    if j == cs {
                        x = x.min(po.pos_of[s] as u32);
                    }
                    if po.above[v * k + j] > x {
                        po.above[v * k + j] = x;
                    }
                }
            }
        }
        Ok(po)
    }

    /// Number of nodes.
    #[must_use]
    pub fn len(&self) -> usize {
        self.chain_of.len()
    }

    /// True when there are no nodes.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.chain_of.is_empty()
    }

    /// Number of chains.
    #[must_use]
    pub fn width(&self) -> usize {
        self.chains.len()
    }

    /// The chains, each in increasing order.
    #[must_use]
    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    /// Chain containing `v`.
    #[must_use]
    pub fn chain_of(&self, v: usize) -> usize {
        self.chain_of[v]
    }

    /// Position of `v` within its chain.
    #[must_use]
    pub fn pos_of(&self, v: usize) -> usize {
        self.pos_of[v]
    }

    /// For each chain, the number of its nodes strictly below `v`.
    #[must_use]
    pub fn below(&self, v: usize) -> &[u32] {
        let k = self.width();
        &self.below[v * k..(v + 1) * k]
    }

    /// For each chain, the position of its first node strictly above `v`
    /// (the chain length if none).
    #[must_use]
    pub fn above(&self, v: usize) -> &[u32] {
        let k = self.width();
        &self.above[v * k..(v + 1) * k]
    }

    /// `a < b`.
    #[must_use]
    pub fn less(&self, a: usize, b: usize) -> bool {
        a != b && (self.pos_of[a] as u32) < self.below[b * self.width() + self.chain_of[a]]
    }

    /// Neither `a < b` nor `b < a`, and `a != b`.
    #[must_use]
    pub fn unordered(&self, a: usize, b: usize) -> bool {
        a != b && !self.less(a, b) && !self.less(b, a)
    }

    /// Adds `a < b` and everything it implies. Returns whether the order
    /// changed.
    pub fn insert(&mut self, a: usize, b: usize) -> Result<bool, CycleError> {
        if a == b || self.less(b, a) {
            return Err(CycleError(a, b));
        }
        if self.less(a, b) {
            return Ok(false);
        }
        let k = self.width();
        let (ca, pa) = (self.chain_of[a], self.pos_of[a] as u32);
        let (cb, pb) = (self.chain_of[b], self.pos_of[b] as u32);
        let mut down: Vec<u32> = self.below(a).to_vec();
        down[ca] = down[ca].max(pa + 1);
        let mut up: Vec<u32> = self.above(b).to_vec();
        up[cb] = up[cb].min(pb);
        let start_up: Vec<u32> = (0..k)
            .map(|j| if j == cb { pb } else { self.above[b * k + j] })
            .collect();
        let end_down: Vec<u32> = (0..k)
            .map(|j| {
                if j == ca {
                    pa + 1
                } else {
                    self.below[a * k + j]
                }
            })
            .collect();

        for j in 0..k {
            for i in start_up[j] as usize..self.chains[j].len() {
                let x = self.chains[j][i];
                let row = &mut self.below[x * k..(x + 1) * k];
                let mut changed = false;
                for (slot, &d) in row.iter_mut().zip(&down) {
                    if *slot < d {
                        *slot = d;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        for j in 0..k {
            for i in (0..end_down[j] as usize).rev() {
                let y = self.chains[j][i];
                let row = &mut self.above[y * k..(y + 1) * k];
                let mut changed = false;
                for (slot, &u) in row.iter_mut().zip(&up) {
                    if *slot > u {
                        *slot = u;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        Ok(true)
    }

    /// `self ⊑ other`: every ordered pair of `other` is ordered the same way
    /// in `self`. Both orders must share the chain layout.
    #[must_use]
    pub fn refines(&self, other: &PartialOrder) -> bool {
        assert_eq!(self.chains, other.chains, "orders over different layouts");
        self.below.iter().zip(&other.below).all(|(s, o)| s >= o)
    }

    /// True when both orders contain exactly the same ordered pairs.
    #[must_use]
    pub fn same_pairs(&self, other: &PartialOrder) -> bool {
        self.chains == other.chains && self.below == other.below
    }

    /// Number of ordered pairs.
    #[must_use]
    pub fn pair_count(&self) -> usize {
        self.below.iter().map(|&x| x as usize).sum()
    }

    /// All ordered pairs `(a, b)` with `a < b`.
    #[must_use]
    pub fn ordered_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for b in 0..self.len() {
            for (j, &cnt) in self.below(b).iter().enumerate() {
                for &a in &self.chains[j][..cnt as usize] {
                    out.push((a, b));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Edges of the transitive reduction, sorted.
    #[must_use]
    pub fn reduction(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for b in 0..self.len() {
            let cands: Vec<usize> = self
                .below(b)
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(j, &c)| self.chains[j][c as usize - 1])
                .collect();
            for &a in &cands {
                if !cands.iter().any(|&c| self.less(a, c)) {
                    out.push((a, b));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// A linearization; among the minimal remaining nodes the smallest index
    /// is taken first.
    #[must_use]
    pub fn linearize(&self) -> Vec<usize> {
        let k = self.width();
        let mut cut = vec![0u32; k];
        let mut out = Vec::with_capacity(self.len());
        while out.len() < self.len() {
            let mut best: Option<usize> = None;
            for j in 0..k {
                let Some(&v) = self.chains[j].get(cut[j] as usize) else {
                    continue;
                };
                let ready = self.below(v).iter().zip(&cut).all(|(b, c)| b <= c);
                if ready && best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
            let v = best.expect("a partial order always has a minimal node");
            cut[self.chain_of[v]] += 1;
            out.push(v);
        }
        out
    }

    /// True when `seq` is a permutation of all nodes that respects the order.
    #[must_use]
    pub fn is_linearization(&self, seq: &[usize]) -> bool {
        if seq.len() != self.len() {
            return false;
        }
        let mut at = vec![usize::MAX; self.len()];
        for (i, &v) in seq.iter().enumerate() {
            if v >= self.len() || at[v] != usize::MAX {
                return false;
            }
            at[v] = i;
        }
        self.ordered_pairs().iter().all(|&(a, b)| at[a] < at[b])
    }

    /// Restriction of this order to a per-chain prefix `cut`, assuming the
    /// prefix is downward closed. `local[v]` gives the new index of node `v`
    /// (or `usize::MAX`), and the new chains are the cut prefixes.
    fn restrict(&self, cut: &[usize], local: &[usize], n_local: usize) -> PartialOrder {
        let k = self.width();
        let chains: Vec<Vec<usize>> = (0..k)
            .map(|j| self.chains[j][..cut[j]].iter().map(|&v| local[v]).collect())
            .collect();
        let mut po = PartialOrder::new(chains);
        for j in 0..k {
            for &v in &self.chains[j][..cut[j]] {
                let lv = local[v];
                for i in 0..k {
                    let b = self.below[v * k + i];
                    debug_assert!(b as usize <= cut[i], "restriction to a non-ideal");
                    po.below[lv * k + i] = b;
                    po.above[lv * k + i] = self.above[v * k + i].min(cut[i] as u32);
                }
            }
        }
        debug_assert!(n_local == po.len());
        po
    }
}

/// An rf-poset `(X, P, RF)` over a subset `X` of a trace's events.
///
/// Nodes are numbered `0..|X|` in increasing event order, and the chains of
/// the order are the threads restricted to `X`.
#[derive(Debug, Clone)]
pub struct RfPoset<'t> {
    trace: &'t Trace,
    nodes: Vec<Ev>,
    local: Vec<usize>,
    order: PartialOrder,
    rf: Vec<Option<usize>>,
    writers: Vec<Vec<Vec<usize>>>,
}

impl<'t> RfPoset<'t> {
    /// The rf-poset `(X, TRF|X, RF|X)` of a trace ideal given as per-thread
    /// prefix lengths.
    #[must_use]
    pub fn from_cut(trace: &'t Trace, cut: &[usize]) -> Self {
        let mut local = vec![usize::MAX; trace.len()];
        let mut nodes = Vec::new();
        for e in 0..trace.len() {
            let ev = trace.event(e);
            if trace.pos(e) < cut[ev.thread] {
                local[e] = nodes.len();
                nodes.push(e);
            }
        }
        let order = trace.trf().restrict(cut, &local, nodes.len());
        Self::assemble(trace, nodes, local, order)
    }

    fn assemble(trace: &'t Trace, nodes: Vec<Ev>, local: Vec<usize>, order: PartialOrder) -> Self {
        let rf = nodes
            .iter()
            .map(|&e| {
                trace.rf(e).map(|w| {
                    debug_assert!(local[w] != usize::MAX, "rf source outside X");
                    local[w]
                })
            })
            .collect();
        let k = order.width();
        let mut writers = vec![vec![Vec::new(); k]; trace.loc_count()];
        for j in 0..k {
            for &v in &order.chains()[j] {
                let ev = trace.event(nodes[v]);
                if ev.kind.is_writer() {
                    writers[ev.loc][j].push(v);
                }
            }
        }
        RfPoset {
            trace,
            nodes,
            local,
            order,
            rf,
            writers,
        }
    }

    /// Replaces the order, keeping events and reads-from.
    #[must_use]
    pub fn with_order(&self, order: PartialOrder) -> Self {
        assert_eq!(
            order.chains(),
            self.order.chains(),
            "order over a different layout"
        );
        RfPoset {
            order,
            ..self.clone()
        }
    }

    /// The source trace.
    #[must_use]
    pub fn trace(&self) -> &'t Trace {
        self.trace
    }

    /// Number of events in `X`.
    #[must_use]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when `X` is empty.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trace event of node `v`.
    #[must_use]
    pub fn event_of(&self, v: usize) -> Ev {
        self.nodes[v]
    }

    /// Node of trace event `e`, if `e ∈ X`.
    #[must_use]
    pub fn node_of(&self, e: Ev) -> Option<usize> {
        (self.local[e] != usize::MAX).then_some(self.local[e])
    }

    /// Trace events of `X`, ascending.
    #[must_use]
    pub fn events(&self) -> &[Ev] {
        &self.nodes
    }

    /// The partial order.
    #[must_use]
    pub fn order(&self) -> &PartialOrder {
        &self.order
    }

    /// Mutable access to the partial order.
    pub fn order_mut(&mut self) -> &mut PartialOrder {
        &mut self.order
    }

    /// Reads-from source of node `v`.
    #[must_use]
    pub fn rf(&self, v: usize) -> Option<usize> {
        self.rf[v]
    }

    /// Kind of node `v`.
    #[must_use]
    pub fn kind(&self, v: usize) -> Kind {
        self.trace.event(self.nodes[v]).kind
    }

    /// Location of node `v`.
    #[must_use]
    pub fn loc(&self, v: usize) -> usize {
        self.trace.event(self.nodes[v]).loc
    }

    /// Conflict between two nodes.
    #[must_use]
    pub fn conflict(&self, a: usize, b: usize) -> bool {
        self.trace.conflict(self.nodes[a], self.nodes[b])
    }

    /// Writes/acquires of location `loc` on chain `j`, in chain order.
    #[must_use]
    pub fn writers_on(&self, loc: usize, j: usize) -> &[usize] {
        &self.writers[loc][j]
    }

    /// Read pairs `(rf(r), r)` over reads and releases.
    #[must_use]
    pub fn read_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .filter_map(|r| self.rf[r].map(|w| (w, r)))
            .collect()
    }

    /// Triplets `(w, r, w')` with `w = rf(r)`, `w' ≠ w` in `X` conflicting
    /// with `r`.
    #[must_use]
    pub fn triplets(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (w, r) in self.read_pairs() {
            let loc = self.loc(r);
            for j in 0..self.order.width() {
                for &w2 in &self.writers[loc][j] {
                    if w2 != w {
                        out.push((w, r, w2));
                    }
                }
            }
        }
        out
    }

    /// The closedness predicate: for every triplet `(w, r, w')`,
    /// `w' < r ⇒ w' < w` and `w < w' ⇒ r < w'`.
    #[must_use]
    pub fn is_closed(&self) -> bool {
        let o = &self.order;
        self.triplets().into_iter().all(|(w, r, w2)| {
            (!o.less(w2, r) || o.less(w2, w)) && (!o.less(w, w2) || o.less(r, w2))
        })
    }

    /// The closure: the weakest closed refinement, or `None` when none exists.
    #[must_use]
    pub fn closure(&self) -> Option<RfPoset<'t>> {
        self.closure_counted().0
    }

    /// Like [`RfPoset::closure`], also returning how many edge insertions
    /// changed the order.
    #[must_use]
    pub fn closure_counted(&self) -> (Option<RfPoset<'t>>, usize) {
        let mut q = self.clone();
        let mut added = 0;
        let pairs = self.read_pairs();
        let k = q.order.width();
        loop {
            let mut changed = false;
            for &(w, r) in &pairs {
                let loc = q.loc(r);
                for j in 0..k {
                    let ws = &self.writers[loc][j];
                    if ws.is_empty() {
                        continue;
                    }
                    // Rule (i): the last writer of chain j below r must be
                    // below w; earlier ones follow by chain order.
                    let lim = q.order.below(r)[j] as usize;
                    let idx = ws.partition_point(|&v| q.order.pos_of(v) < lim);
                    if idx > 0 {
                        let mut c = ws[idx - 1];
                        if c == w {
                            c = if idx > 1 { ws[idx - 2] } else { usize::MAX };
                        }
                        if c != usize::MAX && !q.order.less(c, w) {
                            match q.order.insert(c, w) {
                                Ok(_) => {
                                    added += 1;
                                    changed = true;
                                }
                                Err(_) => return (None, added),
                            }
                        }
                    }
                    // Rule (ii): the first writer of chain j above w must be
                    // above r; later ones follow by chain order.
                    let start = q.order.above(w)[j] as usize;
                    let idx = ws.partition_point(|&v| q.order.pos_of(v) < start);
                    if let Some(&c) = ws.get(idx) {
                        debug_assert!(c != w);
                        if !q.order.less(r, c) {
                            match q.order.insert(r, c) {
                                Ok(_) => {
                                    added += 1;
                                    changed = true;
                                }
                                Err(_) => return (None, added),
                            }
                        }
                    }
                }
            }
            if !changed {
                return (Some(q), added);
            }
        }
    }

    /// True when the node sequence `lin` is a linearization of the order in
    /// which every read and release observes its reads-from source.
    #[must_use]
    pub fn realized_by(&self, lin: &[usize]) -> bool {
        if !self.order.is_linearization(lin) {
            return false;
        }
        let mut last: Vec<Option<usize>> = vec![None; self.trace.loc_count()];
        for &v in lin {
            let kind = self.kind(v);
            if kind.is_observer() && last[self.loc(v)] != self.rf[v] {
                return false;
            }
            if kind.is_writer() {
                last[self.loc(v)] = Some(v);
            }
        }
        true
    }

    /// The linearization of [`PartialOrder::linearize`] as trace events.
    #[must_use]
    pub fn linearize_events(&self) -> Vec<Ev> {
        self.order
            .linearize()
            .into_iter()
            .map(|v| self.nodes[v])
            .collect()
    }

    /// Debug dump of the transitive reduction, one `a < b` line per edge in
    /// event ids, sorted.
    #[must_use]
    pub fn dump(&self) -> String {
        let mut edges: Vec<(usize, usize)> = self
            .order
            .reduction()
            .into_iter()
            .map(|(a, b)| (self.nodes[a] + 1, self.nodes[b] + 1))
            .collect();
        edges.sort_unstable();
        edges.iter().map(|(a, b)| format!("{a} < {b}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::parse_trace;

    fn full_cut(t: &Trace) -> Vec<usize> {
        t.threads().iter().map(Vec::len).collect()
    }

    #[test]
    fn insert_propagates_transitively() {
        let mut po = PartialOrder::new(vec![vec![0, 1], vec![2, 3], vec![4]]);
        assert!(po.unordered(1, 2));
        po.insert(1, 2).unwrap();
        assert!(po.less(0, 3));
        po.insert(3, 4).unwrap();
        assert!(po.less(0, 4));
        assert!(!po.less(4, 0));
        assert_eq!(po.insert(4, 0), Err(CycleError(4, 0)));
        assert_eq!(po.insert(0, 4), Ok(false));
        assert_eq!(po.above(0), &[1, 0, 0]);
        assert_eq!(po.below(4), &[2, 2, 0]);
    }

    #[test]
    fn from_edges_matches_insertion() {
        let chains = vec![vec![0, 1, 2], vec![3, 4], vec![5]];
        let edges = [(1, 4), (3, 2), (4, 5)];
        let built = PartialOrder::from_edges(chains.clone(), &edges).unwrap();
        let mut inc = PartialOrder::new(chains.clone());
        for &(a, b) in &edges {
            inc.insert(a, b).unwrap();
        }
        assert!(built.same_pairs(&inc));
        assert!(PartialOrder::from_edges(chains, &[(1, 3), (4, 0)]).is_err());
    }

    #[test]
    fn linearize_examples() {
        assert!(PartialOrder::new(vec![]).linearize().is_empty());
        assert_eq!(
            PartialOrder::new(vec![vec![0, 1, 2]]).linearize(),
            vec![0, 1, 2]
        );
        assert_eq!(
            PartialOrder::new(vec![vec![1], vec![0]]).linearize(),
            vec![0, 1]
        );
    }

    #[test]
    fn trf_examples() {
        let t = parse_trace("t1 w x\nt1 r x\nt1 w y").unwrap();
        assert_eq!(t.trf().ordered_pairs(), vec![(0, 1), (0, 2), (1, 2)]);
        let t = parse_trace("t1 w x\nt2 r x").unwrap();
        assert!(t.trf().less(0, 1));
        let t = parse_trace("t1 w x\nt2 w y").unwrap();
        assert!(t.trf().unordered(0, 1));
    }

    #[test]
    fn dump_reduction() {
        let t = parse_trace("t1 w x\nt1 w y\nt2 r y\nt2 r x").unwrap();
        let p = RfPoset::from_cut(&t, &full_cut(&t));
        assert_eq!(p.dump(), "1 < 2\n2 < 3\n3 < 4\n");
    }

    #[test]
    fn closed_without_triplets() {
        let t = parse_trace("t1 w x\nt2 r x").unwrap();
        let p = RfPoset::from_cut(&t, &full_cut(&t));
        assert!(p.triplets().is_empty());
        assert!(p.is_closed());
        let c = p.closure().unwrap();
        assert!(c.order().same_pairs(p.order()));
    }

    #[test]
    fn rule_one_orders_conflicting_write_before_source() {
        // w = e2 (t2), r = e3 (t3); w' = e1 (t1) with w' < r through y.
        let t = parse_trace("t1 w x\nt1 w y\nt2 w x\nt3 r y\nt3 r x").unwrap();
        let p = RfPoset::from_cut(&t, &full_cut(&t));
        let (w2, w, r) = (0, 2, 4);
        assert!(p.order().less(w2, r) && p.order().unordered(w2, w));
        assert!(!p.is_closed());
        let c = p.closure().unwrap();
        assert!(c.order().less(w2, w));
        assert!(c.is_closed());
    }

    #[test]
    fn rule_two_orders_read_before_later_write() {
        let t = parse_trace("t1 w x\nt1 w y\nt2 r x\nt3 r y\nt3 w x").unwrap();
        let p = RfPoset::from_cut(&t, &full_cut(&t));
        let (w, r, w2) = (0, 2, 4);
        assert_eq!(p.rf(r), Some(w));
        assert!(p.order().less(w, w2) && p.order().unordered(r, w2));
        assert!(!p.is_closed());
        let c = p.closure().unwrap();
        assert!(c.order().less(r, w2));
        assert!(c.is_closed());
    }

    #[test]
    fn closure_detects_contradiction() {
        let t = parse_trace("t1 w x\nt2 w x\nt1 r x").unwrap();
        let mut p = RfPoset::from_cut(&t, &[2, 1]);
        let (w_other, w_src, r) = (0, 1, 2);
        assert_eq!(p.rf(r), Some(w_src));
        p.order_mut().insert(w_src, w_other).unwrap();
        assert!(p.order().less(w_other, r));
        assert!(p.closure().is_none());
        assert!(!permutations(p.len()).iter().any(|lin| p.realized_by(lin)));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == used.len() {
                out.push(cur.clone());
                return;
            }
            for v in 0..used.len() {
                if !used[v] {
                    used[v] = true;
                    cur.push(v);
                    go(cur, used, out);
                    cur.pop();
                    used[v] = false;
                }
            }
        }
        let mut out = Vec::new();
        go(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    #[test]
    fn refines_and_pairs() {
        let a = PartialOrder::new(vec![vec![0], vec![1]]);
        let mut b = a.clone();
        b.insert(0, 1).unwrap();
        assert!(b.refines(&a));
        assert!(!a.refines(&b));
        assert_eq!(b.pair_count(), 1);
        assert!(b.is_linearization(&[0, 1]));
        assert!(!b.is_linearization(&[1, 0]));
    }
}
