//! Brute-force ground truth: correct reorderings, race decisions, witness
//! verification, and minimum witness distance.
//!
//! The search walks per-thread prefix tuples. An event can be appended when it
//! is next in its thread and, for a read, the latest write to its location is
//! its reads-from source, or, for an acquire, its lock is free. Two partial
//! reorderings with the same prefix tuple and the same latest writer per
//! location have identical futures, which is what the memoized searches key
//! on.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::ideal_engine::Ideal;
use crate::orders::RfPoset;
use crate::trace_model::{Ev, Kind, Trace};

/// Default bound on the number of events the oracle accepts.
pub const DEFAULT_CAP: usize = 14;

/// Oracle failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// The input is larger than the configured cap.
    #[error("{n} events exceed the oracle cap of {cap}")]
    CapExceeded {
        /// Size of the input.
        n: usize,
        /// The cap in force.
        cap: usize,
    },
}

fn check_cap(n: usize, cap: usize) -> Result<(), OracleError> {
    if n > cap {
        Err(OracleError::CapExceeded { n, cap })
    } else {
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct State {
    cut: Vec<usize>,
    last: Vec<Option<Ev>>,
}

struct Search<'a> {
    t: &'a Trace,
    limit: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(t: &'a Trace, limit: Vec<usize>) -> Self {
        Search { t, limit }
    }

    fn start(&self) -> State {
        State {
            cut: vec![0; self.t.thread_count()],
            last: vec![None; self.t.loc_count()],
        }
    }

    fn executed(&self, s: &State, e: Ev) -> bool {
        self.t.pos(e) < s.cut[self.t.event(e).thread]
    }

    fn candidates(&self, s: &State) -> Vec<Ev> {
        (0..self.t.thread_count())
            .filter(|&j| s.cut[j] < self.limit[j])
            .map(|j| self.t.thread_events(j)[s.cut[j]])
            .filter(|&e| self.appendable(s, e))
            .collect()
    }

    fn appendable(&self, s: &State, e: Ev) -> bool {
        let ev = self.t.event(e);
        match ev.kind {
            Kind::Read => s.last[ev.loc] == self.t.rf(e),
            Kind::Write | Kind::Release => true,
            Kind::Acquire => match s.last[ev.loc] {
                None => true,
                Some(a) => self.t.matching(a).is_some_and(|r| self.executed(s, r)),
            },
        }
    }

    fn step(&self, s: &State, e: Ev) -> State {
        let ev = self.t.event(e);
        let mut n = s.clone();
        n.cut[ev.thread] += 1;
        if ev.kind.is_writer() {
            n.last[ev.loc] = Some(e);
        }
        n
    }

    /// Memoized depth-first search for a state satisfying `goal`; returns
    /// the event sequence leading to it.
    fn find(&self, goal: &dyn Fn(&State) -> bool) -> Option<Vec<Ev>> {
        let mut visited = HashSet::new();
        let mut seq = Vec::new();
        let start = self.start();
        if self.dfs(&start, goal, &mut visited, &mut seq) {
            Some(seq)
        } else {
            None
        }
    }

    fn dfs(
        &self,
        s: &State,
        goal: &dyn Fn(&State) -> bool,
        visited: &mut HashSet<State>,
        seq: &mut Vec<Ev>,
    ) -> bool {
        if goal(s) {
            return true;
        }
        if !visited.insert(s.clone()) {
            return false;
        }
        for e in self.candidates(s) {
            seq.push(e);
            if self.dfs(&self.step(s, e), goal, visited, seq) {
                return true;
            }
            seq.pop();
        }
        false
    }

    fn enumerate(&self, s: &State, seq: &mut Vec<Ev>, visit: &mut dyn FnMut(&[Ev])) {
        visit(seq);
        for e in self.candidates(s) {
            seq.push(e);
            self.enumerate(&self.step(s, e), seq, visit);
            seq.pop();
        }
    }
}

fn enabled_in(t: &Trace, cut: &[usize], e: Ev) -> bool {
    cut[t.event(e).thread] == t.pos(e)
}

/// Calls `visit` on every correct reordering of `t`, including the empty one.
pub fn enumerate_correct_reorderings(
    t: &Trace,
    cap: usize,
    visit: &mut dyn FnMut(&[Ev]),
) -> Result<(), OracleError> {
    check_cap(t.len(), cap)?;
    let search = Search::new(t, t.threads().iter().map(Vec::len).collect());
    search.enumerate(&search.start(), &mut Vec::new(), visit);
    Ok(())
}

/// A correct reordering in which both `e1` and `e2` are enabled, if any.
pub fn oracle_witness(
    t: &Trace,
    e1: Ev,
    e2: Ev,
    cap: usize,
) -> Result<Option<Vec<Ev>>, OracleError> {
    check_cap(t.len(), cap)?;
    let search = Search::new(t, t.threads().iter().map(Vec::len).collect());
    Ok(search.find(&|s| enabled_in(t, &s.cut, e1) && enabled_in(t, &s.cut, e2)))
}

/// Whether `(e1, e2)` is a predictable race of `t`, by exhaustive search.
pub fn oracle_predict(t: &Trace, e1: Ev, e2: Ev, cap: usize) -> Result<bool, OracleError> {
    Ok(oracle_witness(t, e1, e2, cap)?.is_some())
}

/// Whether any pair of conflicting reads/writes of `t` is a predictable race.
pub fn oracle_any_race(t: &Trace, cap: usize) -> Result<bool, OracleError> {
    check_cap(t.len(), cap)?;
    let search = Search::new(t, t.threads().iter().map(Vec::len).collect());
    let found = search.find(&|s| {
        let next: Vec<Ev> = (0..t.thread_count())
            .filter_map(|j| t.thread_events(j).get(s.cut[j]).copied())
            .filter(|&e| t.event(e).kind.is_access())
            .collect();
        next.iter()
            .enumerate()
            .any(|(i, &a)| next[i + 1..].iter().any(|&b| t.conflict(a, b)))
    });
    Ok(found.is_some())
}

/// A correct reordering whose event set is exactly the ideal `x`, if any.
pub fn oracle_realize_ideal(x: &Ideal<'_>, cap: usize) -> Result<Option<Vec<Ev>>, OracleError> {
    let t = x.trace();
    check_cap(x.len(), cap)?;
    let search = Search::new(t, x.cut().to_vec());
    let target = x.cut().to_vec();
    Ok(search.find(&|s| s.cut == target))
}

/// A linearization of the rf-poset that realizes its reads-from, as a
/// node sequence, if any.
pub fn oracle_realize_poset(
    p: &RfPoset<'_>,
    cap: usize,
) -> Result<Option<Vec<usize>>, OracleError> {
    check_cap(p.len(), cap)?;
    let o = p.order();
    let k = o.width();
    let locs = p.trace().loc_count();
    let mut visited: HashSet<(Vec<u32>, Vec<Option<usize>>)> = HashSet::new();
    let mut seq = Vec::new();

    fn go(
        p: &RfPoset<'_>,
        cut: &mut Vec<u32>,
        last: &mut Vec<Option<usize>>,
        seq: &mut Vec<usize>,
        visited: &mut HashSet<(Vec<u32>, Vec<Option<usize>>)>,
    ) -> bool {
        let o = p.order();
        if seq.len() == p.len() {
            return true;
        }
        if !visited.insert((cut.clone(), last.clone())) {
            return false;
        }
        for j in 0..o.width() {
            let Some(&v) = o.chains()[j].get(cut[j] as usize) else {
                continue;
            };
            if !o.below(v).iter().zip(cut.iter()).all(|(b, c)| b <= c) {
                continue;
            }
            let kind = p.kind(v);
            let loc = p.loc(v);
            if kind.is_observer() && last[loc] != p.rf(v) {
                continue;
            }
            let saved = last[loc];
            if kind.is_writer() {
                last[loc] = Some(v);
            }
            cut[j] += 1;
            seq.push(v);
            if go(p, cut, last, seq, visited) {
                return true;
            }
            seq.pop();
            cut[j] -= 1;
            last[loc] = saved;
        }
        false
    }

    let mut cut = vec![0u32; k];
    let mut last = vec![None; locs];
    Ok(go(p, &mut cut, &mut last, &mut seq, &mut visited).then_some(seq))
}

/// Conflicting write/acquire pairs `(a, b)` with `a` before `b` in `t` but
/// after it in `seq`.
#[must_use]
pub fn reversals(t: &Trace, seq: &[Ev]) -> Vec<(Ev, Ev)> {
    let mut out = Vec::new();
    for (i, &b) in seq.iter().enumerate() {
        for &a in &seq[i + 1..] {
            if a < b
                && t.event(a).kind.is_writer()
                && t.event(b).kind.is_writer()
                && t.conflict(a, b)
            {
                out.push((a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// The distance `δ(t, seq)`: the number of reversed write/acquire pairs.
#[must_use]
pub fn distance(t: &Trace, seq: &[Ev]) -> usize {
    reversals(t, seq).len()
}

/// The least distance of any witness of `(e1, e2)`, or `None` when the pair
/// is not a predictable race.
pub fn min_distance(t: &Trace, e1: Ev, e2: Ev, cap: usize) -> Result<Option<usize>, OracleError> {
    check_cap(t.len(), cap)?;
    let search = Search::new(t, t.threads().iter().map(Vec::len).collect());
    let mut best: HashMap<State, usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let start = search.start();
    best.insert(start.clone(), 0);
    heap.push(Reverse((0usize, start)));
    while let Some(Reverse((d, s))) = heap.pop() {
        if best.get(&s).is_some_and(|&b| b < d) {
            continue;
        }
        if enabled_in(t, &s.cut, e1) && enabled_in(t, &s.cut, e2) {
            return Ok(Some(d));
        }
        for e in search.candidates(&s) {
            let ev = t.event(e);
            let added = if ev.kind.is_writer() {
                (e + 1..t.len())
                    .filter(|&a| {
                        t.event(a).kind.is_writer() && t.conflict(a, e) && search.executed(&s, a)
                    })
                    .count()
            } else {
                0
            };
            let n = search.step(&s, e);
            let nd = d + added;
            if best.get(&n).is_none_or(|&b| nd < b) {
                best.insert(n.clone(), nd);
                heap.push(Reverse((nd, n)));
            }
        }
    }
    Ok(None)
}

/// Reasons a sequence fails to be a witness.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    /// An id outside the trace.
    #[error("event {0} is not in the trace")]
    OutOfRange(usize),
    /// An event occurs twice.
    #[error("event {0} occurs twice")]
    Duplicate(usize),
    /// An event occurs before its thread predecessor.
    #[error("event {0} occurs without its thread predecessor")]
    NotPrefix(usize),
    /// An acquire occurs while its lock is held.
    #[error("event {0} acquires a held lock")]
    LockViolation(usize),
    /// A read or release observes a different source than in the trace.
    #[error("event {0} observes a different writer than in the trace")]
    WrongReadsFrom(usize),
    /// A query endpoint is part of the sequence.
    #[error("query event {0} is executed")]
    EndpointPresent(usize),
    /// A query endpoint's thread predecessor is missing.
    #[error("query event {0} is not enabled")]
    EndpointNotEnabled(usize),
}

/// Checks that `seq` is a correct reordering of `t`. Errors carry 1-based
/// event ids.
pub fn check_correct_reordering(t: &Trace, seq: &[Ev]) -> Result<(), WitnessError> {
    let search = Search::new(t, t.threads().iter().map(Vec::len).collect());
    let mut s = search.start();
    let mut seen = vec![false; t.len()];
    for &e in seq {
        if e >= t.len() {
            return Err(WitnessError::OutOfRange(e + 1));
        }
        if seen[e] {
            return Err(WitnessError::Duplicate(e + 1));
        }
        seen[e] = true;
        let ev = t.event(e);
        if s.cut[ev.thread] != t.pos(e) {
            return Err(WitnessError::NotPrefix(e + 1));
        }
        if !search.appendable(&s, e) {
            return Err(if ev.kind == Kind::Acquire {
                WitnessError::LockViolation(e + 1)
            } else {
                WitnessError::WrongReadsFrom(e + 1)
            });
        }
        s = search.step(&s, e);
    }
    Ok(())
}

/// Checks that `seq` is a correct reordering of `t` in which `e1` and `e2`
/// are both enabled.
pub fn verify_witness_detailed(t: &Trace, seq: &[Ev], e1: Ev, e2: Ev) -> Result<(), WitnessError> {
    check_correct_reordering(t, seq)?;
    let mut cut = vec![0; t.thread_count()];
    for &e in seq {
        cut[t.event(e).thread] += 1;
    }
    for e in [e1, e2] {
        if seq.contains(&e) {
            return Err(WitnessError::EndpointPresent(e + 1));
        }
        if !enabled_in(t, &cut, e) {
            return Err(WitnessError::EndpointNotEnabled(e + 1));
        }
    }
    Ok(())
}

/// True when `seq` is a correct reordering of `t` with `e1`, `e2` enabled.
#[must_use]
pub fn verify_witness(t: &Trace, seq: &[Ev], e1: Ev, e2: Ev) -> bool {
    verify_witness_detailed(t, seq, e1, e2).is_ok()
}
