//! Trace ideals, feasibility, causal cones, lock causal cones, and the
//! candidate ideal set.
//!
//! Every trace ideal is closed under thread order, so it is stored as a cut:
//! the number of events it contains from each thread.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::orders::RfPoset;
use crate::trace_model::{Ev, Kind, Trace};

/// A downward-closed (under TRF) set of events of a trace.
#[derive(Debug, Clone)]
pub struct Ideal<'t> {
    trace: &'t Trace,
    cut: Vec<usize>,
}

impl PartialEq for Ideal<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.trace, other.trace) && self.cut == other.cut
    }
}

impl Eq for Ideal<'_> {}

impl<'t> Ideal<'t> {
    /// The empty ideal.
    #[must_use]
    pub fn empty(trace: &'t Trace) -> Self {
        Ideal {
            trace,
            cut: vec![0; trace.thread_count()],
        }
    }

    /// The ideal of all events.
    #[must_use]
    pub fn full(trace: &'t Trace) -> Self {
        Ideal {
            trace,
            cut: trace.threads().iter().map(Vec::len).collect(),
        }
    }

    /// The ideal with the given per-thread prefix lengths, if that set is an
    /// ideal.
    #[must_use]
    pub fn from_cut(trace: &'t Trace, cut: Vec<usize>) -> Option<Self> {
        if cut.len() != trace.thread_count()
            || cut.iter().zip(trace.threads()).any(|(&c, th)| c > th.len())
        {
            return None;
        }
        let ideal = Ideal { trace, cut };
        ideal.is_closed().then_some(ideal)
    }

    /// The ideal with exactly the given members, if that set is an ideal.
    #[must_use]
    pub fn from_members(trace: &'t Trace, members: &[Ev]) -> Option<Self> {
        let set: HashSet<Ev> = members.iter().copied().collect();
        let mut cut = vec![0; trace.thread_count()];
        for (j, th) in trace.threads().iter().enumerate() {
            cut[j] = th.iter().take_while(|e| set.contains(e)).count();
        }
        if cut.iter().sum::<usize>() != set.len() {
            return None;
        }
        Ideal::from_cut(trace, cut)
    }

    fn is_closed(&self) -> bool {
        let trf = self.trace.trf();
        self.trace.threads().iter().enumerate().all(|(j, th)| {
            th[..self.cut[j]].iter().all(|&e| {
                trf.below(e)
                    .iter()
                    .zip(&self.cut)
                    .all(|(&b, &c)| b as usize <= c)
            })
        })
    }

    /// The source trace.
    #[must_use]
    pub fn trace(&self) -> &'t Trace {
        self.trace
    }

    /// Per-thread prefix lengths.
    #[must_use]
    pub fn cut(&self) -> &[usize] {
        &self.cut
    }

    /// Number of members.
    #[must_use]
    pub fn len(&self) -> usize {
        self.cut.iter().sum()
    }

    /// True when the ideal has no members.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Membership test.
    #[must_use]
    pub fn contains(&self, e: Ev) -> bool {
        self.trace.pos(e) < self.cut[self.trace.event(e).thread]
    }

    /// Members in increasing event order.
    #[must_use]
    pub fn members(&self) -> Vec<Ev> {
        (0..self.trace.len())
            .filter(|&e| self.contains(e))
            .collect()
    }

    /// Events outside the ideal whose thread predecessors are all inside.
    #[must_use]
    pub fn enabled_events(&self) -> Vec<Ev> {
        let mut out: Vec<Ev> = self
            .trace
            .threads()
            .iter()
            .zip(&self.cut)
            .filter_map(|(th, &c)| th.get(c).copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Acquires inside the ideal whose matching release is outside.
    #[must_use]
    pub fn open_acquires(&self) -> Vec<Ev> {
        self.members()
            .into_iter()
            .filter(|&e| {
                self.trace.event(e).kind == Kind::Acquire
                    && self.trace.matching(e).is_none_or(|r| !self.contains(r))
            })
            .collect()
    }

    /// Union of two ideals of the same trace.
    #[must_use]
    pub fn union(&self, other: &Ideal<'t>) -> Ideal<'t> {
        Ideal {
            trace: self.trace,
            cut: self
                .cut
                .iter()
                .zip(&other.cut)
                .map(|(&a, &b)| a.max(b))
                .collect(),
        }
    }

    /// True when `self ⊆ other`.
    #[must_use]
    pub fn is_subset(&self, other: &Ideal<'t>) -> bool {
        self.cut.iter().zip(&other.cut).all(|(a, b)| a <= b)
    }

    /// Sorted member ids, one per line.
    #[must_use]
    pub fn dump(&self) -> String {
        self.members()
            .iter()
            .map(|e| format!("{}\n", e + 1))
            .collect()
    }

    fn add_down_closure(&mut self, e: Ev) {
        let trf = self.trace.trf();
        for (c, &b) in self.cut.iter_mut().zip(trf.below(e)) {
            *c = (*c).max(b as usize);
        }
        let j = self.trace.event(e).thread;
        self.cut[j] = self.cut[j].max(self.trace.pos(e) + 1);
    }

    /// Closes the set under TRF. Returns whether anything was added.
    fn close(&mut self) -> bool {
        let mut changed = false;
        loop {
            let before = self.cut.clone();
            for j in 0..self.cut.len() {
                if self.cut[j] > 0 {
                    let last = self.trace.thread_events(j)[self.cut[j] - 1];
                    self.add_down_closure(last);
                }
            }
            if self.cut == before {
                return changed;
            }
            changed = true;
        }
    }
}

/// True when `members` is downward closed under TRF.
#[must_use]
pub fn is_ideal(trace: &Trace, members: &[Ev]) -> bool {
    Ideal::from_members(trace, members).is_some()
}

/// Outcome of the feasibility check.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Feasibility<'t> {
    /// Two acquires of the same lock are both open.
    InfeasibleLocks,
    /// The mandated release-before-acquire orderings contradict TRF.
    Infeasible,
    /// Feasible, with its canonical rf-poset.
    Feasible(RfPoset<'t>),
}

impl Feasibility<'_> {
    /// True for [`Feasibility::Feasible`].
    #[must_use]
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Decides feasibility of an ideal and builds its canonical rf-poset: TRF
/// restricted to the ideal plus `rel2 < acq1` for every open `acq1` and every
/// other acquire `acq2` of the same lock.
#[must_use]
pub fn feasibility<'t>(x: &Ideal<'t>) -> Feasibility<'t> {
    let t = x.trace();
    let open = x.open_acquires();
    let mut seen = HashSet::new();
    for &a in &open {
        if !seen.insert(t.event(a).loc) {
            return Feasibility::InfeasibleLocks;
        }
    }
    let mut p = RfPoset::from_cut(t, x.cut());
    for &a1 in &open {
        let lock = t.event(a1).loc;
        for a2 in x.members() {
            let ev = t.event(a2);
            if a2 == a1 || ev.kind != Kind::Acquire || ev.loc != lock {
                continue;
            }
            let rel2 = t.matching(a2).expect("acquire is matched");
            let (Some(u), Some(v)) = (p.node_of(rel2), p.node_of(a1)) else {
                unreachable!("a second open acquire of the lock was excluded above");
            };
            if p.order_mut().insert(u, v).is_err() {
                return Feasibility::Infeasible;
            }
        }
    }
    Feasibility::Feasible(p)
}

/// The smallest ideal in which every event of `s` is enabled.
#[must_use]
pub fn cone<'t>(t: &'t Trace, s: &[Ev]) -> Ideal<'t> {
    let mut x = Ideal::empty(t);
    for &e in s {
        let j = t.event(e).thread;
        let p = t.pos(e);
        if p > 0 {
            x.add_down_closure(t.thread_events(j)[p - 1]);
        }
    }
    x
}

/// Why a lock causal cone could not be built.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LconeError {
    /// The communication topology component of the event has a cycle.
    #[error("the communication topology around thread {0} is not a tree")]
    NotTree(String),
}

/// The lock causal cone of `e`, together with how many extra TRF
/// down-closure rounds were needed after the rooted process.
pub fn lcone_counted<'t>(t: &'t Trace, e: Ev) -> Result<(Ideal<'t>, usize), LconeError> {
    let k = t.thread_count();
    let root = t.event(e).thread;
    let params = t.params();
    let mut adj = vec![Vec::new(); k];
    for &(a, b) in &params.topology {
        adj[a].push(b);
        adj[b].push(a);
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
    }
    let mut parent = vec![usize::MAX; k];
    let mut order = vec![root];
    let mut visited = vec![false; k];
    visited[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                parent[v] = u;
                order.push(v);
                queue.push_back(v);
            } else if parent[u] != v {
                return Err(LconeError::NotTree(t.thread_name(root).to_string()));
            }
        }
    }

    let trf = t.trf();
    let mut x = Ideal::empty(t);
    x.cut[root] = t.pos(e);
    let mut rounds = 0;
    loop {
        for &p1 in &order[1..] {
            let p2 = parent[p1];
            if x.cut[p2] > 0 {
                let e2 = t.thread_events(p2)[x.cut[p2] - 1];
                x.cut[p1] = x.cut[p1].max(trf.below(e2)[p1] as usize);
            }
            loop {
                let open_parent: Vec<usize> = x
                    .open_acquires()
                    .into_iter()
                    .filter(|&a| t.event(a).thread == p2)
                    .map(|a| t.event(a).loc)
                    .collect();
                let pull = t.thread_events(p1)[..x.cut[p1]]
                    .iter()
                    .copied()
                    .filter(|&a| {
                        t.event(a).kind == Kind::Acquire && open_parent.contains(&t.event(a).loc)
                    })
                    .filter_map(|a| t.matching(a))
                    .filter(|&r| !x.contains(r))
                    .min();
                match pull {
                    Some(rel) => x.cut[p1] = t.pos(rel) + 1,
                    None => break,
                }
            }
        }
        if !x.close() {
            return Ok((x, rounds));
        }
        rounds += 1;
    }
}

/// The lock causal cone of `e`.
pub fn lcone<'t>(t: &'t Trace, e: Ev) -> Result<Ideal<'t>, LconeError> {
    lcone_counted(t, e).map(|(x, _)| x)
}

/// The candidate ideal set for the pair `(e1, e2)`: the seed `Cone({e1,e2})`
/// closed under adding, for an open acquire, the down-set of its release.
/// Members are distinct and listed in discovery order.
#[must_use]
pub fn candidate_ideal_set<'t>(t: &'t Trace, e1: Ev, e2: Ev) -> Vec<Ideal<'t>> {
    let seed = cone(t, &[e1, e2]);
    let mut seen: HashSet<Vec<usize>> = HashSet::from([seed.cut.clone()]);
    let mut out = vec![seed];
    let mut i = 0;
    while i < out.len() {
        let y = out[i].clone();
        i += 1;
        for a in y.open_acquires() {
            let rel = t.matching(a).expect("acquire is matched");
            let mut next = y.clone();
            next.add_down_closure(rel);
            if next.contains(e1) || next.contains(e2) {
                continue;
            }
            if seen.insert(next.cut.clone()) {
                out.push(next);
            }
        }
    }
    out
}

/// The bound `min(n, k·γ·ζ)^(k-2)` on the candidate ideal set size, for
/// `k ≥ 2`. With `k·γ·ζ = 0` the base cone alone is counted, so the bound
/// is taken as 1.
#[must_use]
pub fn cis_bound(t: &Trace) -> u128 {
    let p = t.params();
    let alpha = (p.k * p.gamma * p.zeta) as u128;
    if alpha == 0 {
        return 1;
    }
    let base = (p.n as u128).min(alpha);
    base.saturating_pow(p.k.saturating_sub(2) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::parse_trace;

    #[test]
    fn ideal_membership_examples() {
        let t = parse_trace("t1 w x\nt2 r x\nt2 w y").unwrap();
        assert!(is_ideal(&t, &[]));
        assert!(is_ideal(&t, &[0, 1, 2]));
        assert!(!is_ideal(&t, &[1]));
        assert!(is_ideal(&t, &[0]));
        assert!(!is_ideal(&t, &[0, 2]));
    }

    #[test]
    fn enabled_examples() {
        let t = parse_trace("t1 w x\nt1 r x\nt2 w x").unwrap();
        assert_eq!(Ideal::empty(&t).enabled_events(), vec![0, 2]);
        assert!(Ideal::full(&t).enabled_events().is_empty());
        let x = Ideal::from_members(&t, &[0]).unwrap();
        assert_eq!(x.enabled_events(), vec![1, 2]);
    }

    #[test]
    fn feasibility_examples() {
        let t = parse_trace("t1 acq l\nt1 rel l\nt2 acq l\nt2 rel l").unwrap();
        let both_open = Ideal::from_members(&t, &[0, 2]);
        // {acq1, acq2} without releases is an ideal with two open acquires.
        assert!(matches!(
            feasibility(&both_open.unwrap()),
            Feasibility::InfeasibleLocks
        ));
        let t = parse_trace("t1 w x\nt2 w y").unwrap();
        match feasibility(&Ideal::full(&t)) {
            Feasibility::Feasible(p) => assert!(p.order().same_pairs(t.trf())),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_when_mandated_order_contradicts_trf() {
        // acq1 of t1 is open, acq2 of t2 is closed, but rel2 reads through y
        // from inside t1's critical section, so acq1 < rel2 in TRF.
        let t = parse_trace("t1 acq l\nt1 w y\nt1 rel l\nt2 r y\nt2 acq l\nt2 rel l");
        // This trace orders t2's section after t1's; build the ideal that
        // keeps t1's acquire open while containing all of t2.
        let t = t.unwrap();
        let x = Ideal::from_cut(&t, vec![2, 3]).unwrap();
        assert!(matches!(feasibility(&x), Feasibility::Infeasible));
    }

    #[test]
    fn cone_examples() {
        let t = parse_trace("t1 w x\nt1 w y\nt2 r y\nt2 w x").unwrap();
        assert!(cone(&t, &[0]).is_empty());
        assert_eq!(cone(&t, &[1]).members(), vec![0]);
        assert_eq!(cone(&t, &[3]).members(), vec![0, 1, 2]);
        let u = cone(&t, &[1]).union(&cone(&t, &[3]));
        assert_eq!(cone(&t, &[1, 3]), u);
    }

    #[test]
    fn lcone_examples() {
        let t = parse_trace("t1 w x\nt2 r x\nt2 w y").unwrap();
        assert_eq!(lcone(&t, 2).unwrap().members(), vec![0, 1]);
        let t = parse_trace("t1 w x\nt2 w y").unwrap();
        assert!(lcone(&t, 0).unwrap().is_empty());
        let t = parse_trace("t1 w x\nt2 w x\nt2 w y\nt3 w y\nt3 w z\nt1 w z").unwrap();
        assert!(lcone(&t, 0).is_err());
    }

    #[test]
    fn lcone_pulls_release_of_open_section() {
        // Root t2 holds l open at its last event; t1's section on l must be
        // completed before it.
        let t =
            parse_trace("t1 acq l\nt1 w x\nt1 rel l\nt2 acq l\nt2 r x\nt2 w y\nt2 rel l").unwrap();
        let x = lcone(&t, 5).unwrap();
        assert_eq!(x.members(), vec![0, 1, 2, 3, 4]);
        assert!(feasibility(&x).is_feasible());
    }

    #[test]
    fn cis_lock_free_is_single_cone() {
        let t = parse_trace("t1 w x\nt1 w y\nt2 w y\nt2 w x").unwrap();
        let cis = candidate_ideal_set(&t, 0, 3);
        assert_eq!(cis.len(), 1);
        assert_eq!(cis[0], cone(&t, &[0, 3]));
    }

    #[test]
    fn cis_adds_release_closure() {
        let t = parse_trace("t3 acq m\nt3 w z\nt2 r z\nt3 rel m\nt1 w x\nt2 w x").unwrap();
        let cis = candidate_ideal_set(&t, 4, 5);
        let cuts: Vec<Vec<usize>> = cis.iter().map(|y| y.cut().to_vec()).collect();
        assert_eq!(cuts, vec![vec![2, 1, 0], vec![3, 1, 0]]);
        assert!(cis.iter().all(|y| !y.contains(4) && !y.contains(5)));
        assert!(cis.len() as u128 <= cis_bound(&t));
    }
}
