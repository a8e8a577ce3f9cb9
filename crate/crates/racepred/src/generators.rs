//! Trace generators: seeded random traces and the two hardness reductions
//! (orthogonal vectors and independent set) as race-query instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trace_model::{Ev, Kind, RawEvent, Trace, TraceError};

/// Generator failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    /// The parameters admit no valid trace.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    /// The instance violates its invariants.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    /// The produced events failed validation.
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// A generated trace together with the query it encodes.
#[derive(Debug, Clone)]
pub struct Generated {
    /// The trace.
    pub trace: Trace,
    /// First query endpoint.
    pub e1: Ev,
    /// Second query endpoint.
    pub e2: Ev,
}

/// Parameters of [`gen_random_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomConfig {
    /// Seed of the generator.
    pub seed: u64,
    /// Number of events; raised to `k` when smaller.
    pub n: usize,
    /// Number of threads.
    pub k: usize,
    /// Number of global variables.
    pub d_globals: usize,
    /// Number of locks.
    pub d_locks: usize,
    /// Probability that an access is a read of an already written variable.
    pub read_ratio: f64,
    /// Probability that a step is a lock operation.
    pub lock_ratio: f64,
    /// Largest number of locks one thread holds at once.
    pub nesting_max: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            seed: 0,
            n: 10,
            k: 2,
            d_globals: 2,
            d_locks: 1,
            read_ratio: 0.4,
            lock_ratio: 0.3,
            nesting_max: 1,
        }
    }
}

/// A valid random trace, deterministic in the configuration. Every thread
/// has at least one event, locks are well nested and released by the end,
/// and reads only target variables written earlier.
pub fn gen_random_trace(cfg: &RandomConfig) -> Result<Trace, GenError> {
    if cfg.k == 0 {
        return Err(GenError::InvalidParameters("k must be positive".into()));
    }
    if cfg.d_globals == 0 {
        return Err(GenError::InvalidParameters(
            "at least one global is needed".into(),
        ));
    }
    for (name, r) in [
        ("read_ratio", cfg.read_ratio),
        ("lock_ratio", cfg.lock_ratio),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(GenError::InvalidParameters(format!(
                "{name} must lie in [0, 1]"
            )));
        }
    }
    if cfg.lock_ratio > 0.0 && (cfg.nesting_max == 0 || cfg.d_locks == 0) {
        return Err(GenError::InvalidParameters(
            "lock operations need a lock and a positive nesting bound".into(),
        ));
    }
    let n = cfg.n.max(cfg.k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); cfg.k];
    let mut holder: Vec<Option<usize>> = vec![None; cfg.d_locks];
    let mut started = vec![false; cfg.k];
    let mut written = vec![false; cfg.d_globals];
    let mut raw = Vec::with_capacity(n);
    let thread = |j: usize| format!("t{}", j + 1);
    let global = |g: usize| format!("x{}", g + 1);
    let lock = |l: usize| format!("l{}", l + 1);

    while raw.len() < n {
        let remaining = n - raw.len();
        let open: usize = held.iter().map(Vec::len).sum();
        let unstarted = started.iter().filter(|s| !**s).count();
        let j;
        let mut kind = None;
        if remaining <= open {
            let holders: Vec<usize> = (0..cfg.k).filter(|&j| !held[j].is_empty()).collect();
            j = holders[rng.gen_range(0..holders.len())];
            kind = Some(Kind::Release);
        } else if remaining - open <= unstarted {
            let idle: Vec<usize> = (0..cfg.k).filter(|&j| !started[j]).collect();
            j = idle[rng.gen_range(0..idle.len())];
        } else {
            j = rng.gen_range(0..cfg.k);
            if rng.gen_bool(cfg.lock_ratio) {
                let unstarted_after = unstarted - usize::from(!started[j]);
                let free: Vec<usize> = (0..cfg.d_locks).filter(|&l| holder[l].is_none()).collect();
                let can_acquire = held[j].len() < cfg.nesting_max
                    && !free.is_empty()
                    && remaining >= open + 2 + unstarted_after;
                if !held[j].is_empty() && (!can_acquire || rng.gen_bool(0.5)) {
                    kind = Some(Kind::Release);
                } else if can_acquire {
                    let l = free[rng.gen_range(0..free.len())];
                    held[j].push(l);
                    holder[l] = Some(j);
                    started[j] = true;
                    raw.push(RawEvent::new(thread(j), Kind::Acquire, lock(l)));
                    continue;
                }
            }
        }
        started[j] = true;
        if kind == Some(Kind::Release) {
            let l = held[j].pop().expect("thread holds a lock");
            holder[l] = None;
            raw.push(RawEvent::new(thread(j), Kind::Release, lock(l)));
            continue;
        }
        let readable: Vec<usize> = (0..cfg.d_globals).filter(|&g| written[g]).collect();
        if !readable.is_empty() && rng.gen_bool(cfg.read_ratio) {
            let g = readable[rng.gen_range(0..readable.len())];
            raw.push(RawEvent::new(thread(j), Kind::Read, global(g)));
        } else {
            let g = rng.gen_range(0..cfg.d_globals);
            written[g] = true;
            raw.push(RawEvent::new(thread(j), Kind::Write, global(g)));
        }
    }
    Ok(Trace::from_events(&raw)?)
}

/// An orthogonal-vectors instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OvInstance {
    /// First vector set.
    pub a: Vec<Vec<bool>>,
    /// Second vector set.
    pub b: Vec<Vec<bool>>,
}

impl OvInstance {
    /// Parses vectors given as binary strings such as `101`.
    pub fn from_strings(a: &[&str], b: &[&str]) -> Result<Self, GenError> {
        let parse = |s: &&str| -> Result<Vec<bool>, GenError> {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(GenError::InvalidInstance(format!(
                        "bad vector digit `{other}`"
                    ))),
                })
                .collect()
        };
        Ok(OvInstance {
            a: a.iter().map(parse).collect::<Result<_, _>>()?,
            b: b.iter().map(parse).collect::<Result<_, _>>()?,
        })
    }

    /// The common dimension.
    #[must_use]
    pub fn dim(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), GenError> {
        let d = self.dim();
        if self.a.is_empty() || self.a.len() != self.b.len() {
            return Err(GenError::InvalidInstance(
                "both sets must be non-empty and of equal size".into(),
            ));
        }
        if d == 0 || self.a.iter().chain(&self.b).any(|v| v.len() != d) {
            return Err(GenError::InvalidInstance(
                "all vectors must share a positive dimension".into(),
            ));
        }
        Ok(())
    }

    /// Whether some `a ∈ A`, `b ∈ B` have disjoint supports.
    #[must_use]
    pub fn has_orthogonal_pair(&self) -> bool {
        self.a.iter().any(|a| {
            self.b
                .iter()
                .any(|b| a.iter().zip(b).all(|(x, y)| !(*x && *y)))
        })
    }
}

/// Builds the two-thread trace of the orthogonal-vectors reduction and the
/// query `(w(z), r(z))`, which is a predictable race iff the instance has an
/// orthogonal pair. Thread `t1` runs the `B` side and `t2` the `A` side,
/// sequentially.
pub fn gen_ov_trace(inst: &OvInstance) -> Result<Generated, GenError> {
    inst.validate()?;
    let m = inst.a.len();
    let d = inst.dim();
    let mut tb: Vec<RawEvent> = Vec::new();
    let mut ta: Vec<RawEvent> = Vec::new();
    let ev = |t: &str, k: Kind, loc: &str| RawEvent::new(t, k, loc);
    let (b, a) = ("t1", "t2");
    use Kind::{Acquire, Read, Release, Write};

    for l in (1..=m).rev() {
        let v = &inst.b[l - 1];
        for i in (1..=d).rev() {
            let pair: [&str; 2] = if v[i - 1] { ["x1", "x2"] } else { ["x2", "x1"] };
            for x in pair {
                tb.push(ev(b, Write, x));
                if x == "x2" && i == 1 && l == m {
                    tb.push(ev(b, Write, "y"));
                }
            }
            if i < d {
                tb.push(ev(b, Read, "x3"));
            }
            if i >= 2 {
                tb.push(ev(b, Write, "x3"));
                tb.push(ev(b, Read, "x1"));
                tb.push(ev(b, Write, "x6"));
                continue;
            }
            if l == 1 {
                tb.push(ev(b, Write, "x7"));
            }
            if l < m {
                tb.push(ev(b, Read, "x4"));
            }
            if l >= 2 {
                tb.push(ev(b, Write, "x4"));
            }
            if l == 1 {
                tb.push(ev(b, Acquire, "l"));
                tb.push(ev(b, Read, "x1"));
                tb.push(ev(b, Write, "z"));
                tb.push(ev(b, Release, "l"));
            } else {
                tb.push(ev(b, Read, "x1"));
            }
            if l == m && m > 1 {
                tb.push(ev(b, Write, "x5"));
            }
        }
    }

    for j in 1..=m {
        let v = &inst.a[j - 1];
        for i in (1..=d).rev() {
            let pair: [&str; 2] = if v[i - 1] { ["x2", "x1"] } else { ["x1", "x2"] };
            for x in pair {
                ta.push(ev(a, Write, x));
                if x == "x1" && i == 1 && j == 1 {
                    ta.push(ev(a, Acquire, "l"));
                    ta.push(ev(a, Release, "l"));
                }
            }
            if i < d {
                ta.push(ev(a, Read, "x6"));
            }
            if i >= 2 {
                ta.push(ev(a, Write, "x3"));
                ta.push(ev(a, Write, "x6"));
                ta.push(ev(a, Read, "x2"));
                continue;
            }
            if j >= 2 {
                ta.push(ev(a, Read, "x7"));
            }
            ta.push(ev(a, Write, "x4"));
            if j < m {
                ta.push(ev(a, Write, "x5"));
            }
            if j == m {
                ta.push(ev(a, Read, "y"));
            }
            ta.push(ev(a, Read, "x2"));
            if j < m {
                ta.push(ev(a, Write, "x7"));
                ta.push(ev(a, Read, "x5"));
            }
        }
    }
    ta.push(ev(a, Read, "z"));

    let raw: Vec<RawEvent> = tb.into_iter().chain(ta).collect();
    let trace = Trace::from_events(&raw)?;
    let find = |kind: Kind| {
        (0..trace.len())
            .find(|&e| trace.event(e).kind == kind && trace.loc_name(trace.event(e).loc) == "z")
            .expect("the construction emits both z events")
    };
    let (e1, e2) = (find(Write), find(Read));
    Ok(Generated { trace, e1, e2 })
}

/// An independent-set instance on nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsInstance {
    /// Number of nodes.
    pub n: usize,
    /// Undirected edges over `1..=n`.
    pub edges: Vec<(usize, usize)>,
    /// Target independent-set size.
    pub c: usize,
}

impl IsInstance {
    /// Whether the graph has an independent set of size `c`, by enumeration.
    #[must_use]
    pub fn has_independent_set(&self) -> bool {
        if self.c > self.n {
            return false;
        }
        (0u32..1 << self.n).any(|mask| {
            mask.count_ones() as usize == self.c
                && self
                    .edges
                    .iter()
                    .all(|&(u, v)| mask & (1 << (u - 1)) == 0 || mask & (1 << (v - 1)) == 0)
        })
    }

    /// Removes isolated nodes, lowering `c` by their number (they join any
    /// independent set), and relabels the rest to `1..=n'`.
    #[must_use]
    pub fn without_isolated(&self) -> IsInstance {
        let mut degree = vec![0usize; self.n + 1];
        for &(u, v) in &self.edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut label = vec![0usize; self.n + 1];
        let mut next = 0;
        for u in 1..=self.n {
            if degree[u] > 0 {
                next += 1;
                label[u] = next;
            }
        }
        let isolated = self.n - next;
        IsInstance {
            n: next,
            edges: self
                .edges
                .iter()
                .map(|&(u, v)| (label[u], label[v]))
                .collect(),
            c: self.c.saturating_sub(isolated),
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        for &(u, v) in &self.edges {
            if u == 0 || v == 0 || u > self.n || v > self.n || u == v {
                return Err(GenError::InvalidInstance(format!("bad edge {u} {v}")));
            }
        }
        Ok(())
    }
}

/// Builds the `2c + 2`-thread trace of the independent-set reduction and the
/// query `(w(x), r(x))`, which is a predictable race iff the graph has an
/// independent set of size `c`. Isolated nodes are removed first.
pub fn gen_indset_trace(inst: &IsInstance) -> Result<Generated, GenError> {
    inst.validate()?;
    let g = inst.without_isolated();
    if g.n == 0 && g.c > 0 {
        return Err(GenError::InvalidInstance(
            "an edgeless graph with fewer nodes than the target".into(),
        ));
    }
    let c = g.c;
    let n = g.n;
    let mut nbrs = vec![Vec::new(); n + 1];
    for &(u, v) in &g.edges {
        if !nbrs[u].contains(&v) {
            nbrs[u].push(v);
            nbrs[v].push(u);
        }
    }
    for list in &mut nbrs {
        list.sort_unstable();
    }
    let edge_lock = |u: usize, v: usize| format!("l_{}_{}", u.min(v), u.max(v));
    use Kind::{Acquire, Read, Release, Write};
    let ev = |t: usize, k: Kind, loc: String| RawEvent::new(format!("t{t}"), k, loc);

    let mut raw = vec![ev(2 * c + 1, Write, "x".into())];
    for i in 1..=c {
        let mut main = Vec::new();
        for j in 1..=n {
            for &l in &nbrs[j] {
                main.push(ev(i, Acquire, edge_lock(j, l)));
            }
            let (w, r) = if j == 1 {
                (format!("s_{i}"), format!("z_{i}_1"))
            } else if j == n {
                (format!("y_{i}_{n}"), "x".to_string())
            } else {
                (format!("y_{i}_{j}"), format!("z_{i}_{j}"))
            };
            main.push(ev(i, Write, w));
            main.push(ev(i, Read, r));
            for &l in nbrs[j].iter().rev() {
                main.push(ev(i, Release, edge_lock(j, l)));
            }
        }
        let mut relay = Vec::new();
        for j in 1..n {
            relay.push(ev(c + i, Acquire, format!("m_{i}")));
            relay.push(ev(c + i, Write, format!("z_{i}_{j}")));
            relay.push(ev(c + i, Read, format!("y_{i}_{}", j + 1)));
            relay.push(ev(c + i, Release, format!("m_{i}")));
        }
        raw.extend(interleave(main, relay));
    }
    let last = 2 * c + 2;
    for i in 1..=c {
        raw.push(ev(last, Read, format!("s_{i}")));
    }
    for i in 1..=c {
        raw.push(ev(last, Acquire, format!("m_{i}")));
    }
    raw.push(ev(last, Read, "x".into()));
    for i in (1..=c).rev() {
        raw.push(ev(last, Release, format!("m_{i}")));
    }
    let trace = Trace::from_events(&raw)?;
    let e2 = raw.len() - 1 - c;
    Ok(Generated { trace, e1: 0, e2 })
}

/// Merges two event sequences, running one until it reaches a read whose
/// variable has not been written yet and then switching to the other.
fn interleave(a: Vec<RawEvent>, b: Vec<RawEvent>) -> Vec<RawEvent> {
    let mut written = std::collections::HashSet::new();
    written.insert("x".to_string());
    let seqs = [a, b];
    let mut pos = [0usize, 0];
    let mut cur = 0;
    let mut out = Vec::new();
    while pos[0] < seqs[0].len() || pos[1] < seqs[1].len() {
        let blocked = |s: usize, pos: &[usize; 2], written: &std::collections::HashSet<String>| {
            seqs[s]
                .get(pos[s])
                .is_none_or(|e| e.kind == Kind::Read && !written.contains(&e.loc))
        };
        if blocked(cur, &pos, &written) {
            cur = 1 - cur;
            assert!(
                !blocked(cur, &pos, &written),
                "both sides wait on each other"
            );
        }
        let e = seqs[cur][pos[cur]].clone();
        pos[cur] += 1;
        if e.kind == Kind::Write {
            written.insert(e.loc.clone());
        }
        out.push(e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_predict;

    #[test]
    fn random_minimum_size() {
        let cfg = RandomConfig {
            seed: 1,
            n: 0,
            k: 3,
            ..RandomConfig::default()
        };
        let t = gen_random_trace(&cfg).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.threads().iter().all(|th| th.len() == 1));
    }

    #[test]
    fn random_is_deterministic() {
        let cfg = RandomConfig {
            seed: 7,
            n: 12,
            k: 3,
            ..RandomConfig::default()
        };
        let a = gen_random_trace(&cfg).unwrap();
        let b = gen_random_trace(&cfg).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn random_without_locks_has_no_nesting() {
        for seed in 0..20 {
            let cfg = RandomConfig {
                seed,
                lock_ratio: 0.0,
                ..RandomConfig::default()
            };
            assert_eq!(gen_random_trace(&cfg).unwrap().params().gamma, 0);
        }
    }

    #[test]
    fn random_rejects_unsatisfiable_parameters() {
        let cfg = RandomConfig {
            nesting_max: 0,
            lock_ratio: 0.5,
            ..RandomConfig::default()
        };
        assert!(gen_random_trace(&cfg).is_err());
    }

    #[test]
    fn ov_examples() {
        let yes = OvInstance::from_strings(&["1"], &["0"]).unwrap();
        let g = gen_ov_trace(&yes).unwrap();
        assert!(yes.has_orthogonal_pair());
        assert!(oracle_predict(&g.trace, g.e1, g.e2, 64).unwrap());
        let no = OvInstance::from_strings(&["1"], &["1"]).unwrap();
        let g = gen_ov_trace(&no).unwrap();
        assert!(!no.has_orthogonal_pair());
        assert!(!oracle_predict(&g.trace, g.e1, g.e2, 64).unwrap());
    }

    #[test]
    fn ov_shape() {
        let inst = OvInstance::from_strings(&["101", "011"], &["110", "001"]).unwrap();
        let g = gen_ov_trace(&inst).unwrap();
        let p = g.trace.params();
        assert_eq!(p.k, 2);
        let locks = (0..g.trace.loc_count())
            .filter(|&l| g.trace.loc_is_lock(l))
            .count();
        assert_eq!(locks, 1);
        assert!(p.d - locks <= 9);
        assert!(g.trace.len() <= 2 * inst.a.len() * 10 * inst.dim());
    }

    #[test]
    fn indset_examples() {
        let k3 = IsInstance {
            n: 3,
            edges: vec![(1, 2), (2, 3), (1, 3)],
            c: 2,
        };
        let g = gen_indset_trace(&k3).unwrap();
        assert_eq!(g.trace.thread_count(), 6);
        assert!(!k3.has_independent_set());
        assert!(!oracle_predict(&g.trace, g.e1, g.e2, 64).unwrap());
        let path = IsInstance {
            n: 3,
            edges: vec![(1, 2), (2, 3)],
            c: 2,
        };
        let g = gen_indset_trace(&path).unwrap();
        assert!(path.has_independent_set());
        assert!(oracle_predict(&g.trace, g.e1, g.e2, 64).unwrap());
    }

    #[test]
    fn isolated_nodes_lower_the_target() {
        let inst = IsInstance {
            n: 4,
            edges: vec![(1, 2)],
            c: 3,
        };
        let s = inst.without_isolated();
        assert_eq!((s.n, s.c), (2, 1));
        assert_eq!(s.has_independent_set(), inst.has_independent_set());
    }
}
