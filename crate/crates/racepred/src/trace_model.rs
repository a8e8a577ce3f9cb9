//! Events, traces, the on-disk trace format, and trace parameters.
//!
//! A trace is a sequence of events. Each event belongs to a thread and is
//! either a read or a write of a global variable, or an acquire or a release
//! of a lock. Internally an event is addressed by its 0-based index [`Ev`];
//! the user-facing id is `index + 1`.
//!
//! # File format
//!
//! One event per line: `<thread> <op> <location>` where `<thread>` matches
//! `t[0-9]+`, `<op>` is one of `w`, `r`, `acq`, `rel` and `<location>` matches
//! `[A-Za-z_][A-Za-z0-9_]*`. A `#` starts a comment that runs to the end of
//! the line and blank lines are ignored.
//!
//! Globals that are read before any write receive a synthetic initial write,
//! issued by the reserved thread `t0` at the start of the trace, unless
//! synthesis is disabled.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::orders::PartialOrder;

/// 0-based event index. The public event id is `index + 1`.
pub type Ev = usize;

/// Name of the thread that issues synthesized initial writes.
pub const INIT_THREAD: &str = "t0";

/// The four event kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    /// Read of a global variable.
    Read,
    /// Write of a global variable.
    Write,
    /// Lock acquire.
    Acquire,
    /// Lock release.
    Release,
}

impl Kind {
    /// True for reads and writes.
    #[must_use]
    pub fn is_access(self) -> bool {
        matches!(self, Kind::Read | Kind::Write)
    }

    /// True for writes and acquires: the events that other events observe.
    #[must_use]
    pub fn is_writer(self) -> bool {
        matches!(self, Kind::Write | Kind::Acquire)
    }

    /// True for reads and releases: the events with a reads-from source.
    #[must_use]
    pub fn is_observer(self) -> bool {
        matches!(self, Kind::Read | Kind::Release)
    }

    /// The operation mnemonic used by the file format.
    #[must_use]
    pub fn mnemonic(self) -> &'static str {
        match self {
            Kind::Read => "r",
            Kind::Write => "w",
            Kind::Acquire => "acq",
            Kind::Release => "rel",
        }
    }

    fn parse(op: &str) -> Option<Kind> {
        match op {
            "r" => Some(Kind::Read),
            "w" => Some(Kind::Write),
            "acq" => Some(Kind::Acquire),
            "rel" => Some(Kind::Release),
            _ => None,
        }
    }
}

/// One atomic step of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Thread index into [`Trace::thread_name`].
    pub thread: usize,
    /// Event kind.
    pub kind: Kind,
    /// Location index into [`Trace::loc_name`]; a global for accesses and a
    /// lock for acquires and releases.
    pub loc: usize,
}

/// An event as written in the source, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    /// Thread name, e.g. `t1`.
    pub thread: String,
    /// Event kind.
    pub kind: Kind,
    /// Location name.
    pub loc: String,
    /// Source line, if the event came from a file.
    pub line: Option<usize>,
}

impl RawEvent {
    /// Builds a raw event without a source line.
    pub fn new(thread: impl Into<String>, kind: Kind, loc: impl Into<String>) -> Self {
        RawEvent {
            thread: thread.into(),
            kind,
            loc: loc.into(),
            line: None,
        }
    }
}

/// Errors raised while parsing or validating a trace.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    /// A line does not follow the `<thread> <op> <location>` format.
    #[error("line {line}: malformed event `{text}`")]
    Malformed { line: usize, text: String },
    /// A release without a matching open acquire by the same thread.
    #[error("event at {at}: release of `{lock}` without a matching acquire")]
    UnmatchedRelease { at: usize, lock: String },
    /// An acquire of a lock held by another thread.
    #[error("event at {at}: overlapping critical sections on `{lock}`")]
    OverlappingCriticalSections { at: usize, lock: String },
    /// An acquire of a lock already held by the same thread.
    #[error("event at {at}: re-entrant acquire of `{lock}`")]
    ReentrantAcquire { at: usize, lock: String },
    /// A name used both as a lock and as a global variable.
    #[error("event at {at}: `{name}` is used both as a lock and as a global")]
    RoleConflict { at: usize, name: String },
    /// A read of a global with no earlier write and synthesis disabled.
    #[error("event at {at}: read of `{loc}` which is never written before")]
    UnwrittenRead { at: usize, loc: String },
    /// A critical section still open at the end of the trace.
    #[error("critical section on `{lock}` is never closed")]
    OpenCriticalSection { lock: String },
    /// Init synthesis is needed but the input already uses the init thread.
    #[error("thread `{INIT_THREAD}` is reserved for synthesized initial writes")]
    ReservedThread,
}

/// Errors raised by [`wrap_pair`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WrapError {
    /// An event id outside the trace.
    #[error("event id {0} is out of range")]
    OutOfRange(usize),
    /// The two events are not conflicting reads/writes.
    #[error("events {0} and {1} are not conflicting read/write events")]
    NotConflicting(usize, usize),
}

/// A validated trace with its reads-from function, lock matching and
/// thread-reads-from order.
#[derive(Debug, Clone)]
pub struct Trace {
    events: Vec<Event>,
    thread_names: Vec<String>,
    loc_names: Vec<String>,
    loc_is_lock: Vec<bool>,
    threads: Vec<Vec<Ev>>,
    pos: Vec<usize>,
    rf: Vec<Option<Ev>>,
    partner: Vec<Option<Ev>>,
    lines: Vec<Option<usize>>,
    init_thread: Option<usize>,
    trf: PartialOrder,
}

/// Options controlling [`parse_trace_with`] and [`Trace::from_raw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Synthesize initial writes for globals read before any write.
    pub init_synthesis: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            init_synthesis: true,
        }
    }
}

/// Parses a trace with default options (init synthesis on).
pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    parse_trace_with(text, ParseOptions::default())
}

/// Parses a trace document.
pub fn parse_trace_with(text: &str, opts: ParseOptions) -> Result<Trace, TraceError> {
    let mut raw = Vec::new();
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let body = full.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let malformed = || TraceError::Malformed {
            line,
            text: body.to_string(),
        };
        let mut parts = body.split_whitespace();
        let (Some(thread), Some(op), Some(loc), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(malformed());
        };
        let kind = Kind::parse(op).ok_or_else(malformed)?;
        if !valid_thread(thread) || !valid_location(loc) {
            return Err(malformed());
        }
        raw.push(RawEvent {
            thread: thread.to_string(),
            kind,
            loc: loc.to_string(),
            line: Some(line),
        });
    }
    Trace::from_raw(&raw, opts)
}

fn valid_thread(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('t') && s.len() > 1 && chars.all(|c| c.is_ascii_digit())
}

fn valid_location(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Trace {
    /// Validates a raw event sequence and builds the trace.
    pub fn from_raw(raw: &[RawEvent], opts: ParseOptions) -> Result<Trace, TraceError> {
        let at = |i: usize| raw[i].line.unwrap_or(i + 1);

        // Role inference: the first use of a name decides lock or global.
        let mut role: HashMap<&str, bool> = HashMap::new();
        for (i, e) in raw.iter().enumerate() {
            let is_lock = !e.kind.is_access();
            match role.get(e.loc.as_str()) {
                Some(&r) if r != is_lock => {
                    return Err(TraceError::RoleConflict {
                        at: at(i),
                        name: e.loc.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    role.insert(e.loc.as_str(), is_lock);
                }
            }
        }

        // Globals read before any write.
        let mut written: HashMap<&str, ()> = HashMap::new();
        let mut unwritten: Vec<&str> = Vec::new();
        for (i, e) in raw.iter().enumerate() {
            match e.kind {
                Kind::Write => {
                    written.insert(e.loc.as_str(), ());
                }
                Kind::Read if !written.contains_key(e.loc.as_str()) => {
                    if !opts.init_synthesis {
                        return Err(TraceError::UnwrittenRead {
                            at: at(i),
                            loc: e.loc.clone(),
                        });
                    }
                    if !unwritten.contains(&e.loc.as_str()) {
                        unwritten.push(e.loc.as_str());
                    }
                }
                _ => {}
            }
        }
        if !unwritten.is_empty() && raw.iter().any(|e| e.thread == INIT_THREAD) {
            return Err(TraceError::ReservedThread);
        }

        let mut full: Vec<RawEvent> = unwritten
            .iter()
            .map(|loc| RawEvent::new(INIT_THREAD, Kind::Write, *loc))
            .collect();
        let synthesized = full.len();
        full.extend(raw.iter().cloned());
        Self::build(&full, synthesized, |i| {
            if i < synthesized {
                None
            } else {
                Some(at(i - synthesized))
            }
        })
    }

    fn build(
        raw: &[RawEvent],
        synthesized: usize,
        at: impl Fn(usize) -> Option<usize>,
    ) -> Result<Trace, TraceError> {
        let position = |i: usize| at(i).unwrap_or(i + 1);
        let mut thread_ix: HashMap<String, usize> = HashMap::new();
        let mut loc_ix: HashMap<String, usize> = HashMap::new();
        let mut thread_names = Vec::new();
        let mut loc_names = Vec::new();
        let mut loc_is_lock = Vec::new();
        let mut events = Vec::with_capacity(raw.len());
        for e in raw {
            let thread = *thread_ix.entry(e.thread.clone()).or_insert_with(|| {
                thread_names.push(e.thread.clone());
                thread_names.len() - 1
            });
            let loc = *loc_ix.entry(e.loc.clone()).or_insert_with(|| {
                loc_names.push(e.loc.clone());
                loc_is_lock.push(!e.kind.is_access());
                loc_names.len() - 1
            });
            events.push(Event {
                thread,
                kind: e.kind,
                loc,
            });
        }

        let n = events.len();
        let k = thread_names.len();
        let mut threads: Vec<Vec<Ev>> = vec![Vec::new(); k];
        let mut pos = vec![0; n];
        let mut rf = vec![None; n];
        let mut partner = vec![None; n];
        let mut last_write: Vec<Option<Ev>> = vec![None; loc_names.len()];
        let mut holder: Vec<Option<Ev>> = vec![None; loc_names.len()];
        for (i, e) in events.iter().enumerate() {
            pos[i] = threads[e.thread].len();
            threads[e.thread].push(i);
            let name = || loc_names[e.loc].clone();
            match e.kind {
                Kind::Write => last_write[e.loc] = Some(i),
                Kind::Read => {
                    rf[i] = last_write[e.loc];
                    if rf[i].is_none() {
                        return Err(TraceError::UnwrittenRead {
                            at: position(i),
                            loc: name(),
                        });
                    }
                }
                Kind::Acquire => match holder[e.loc] {
                    Some(h) if events[h].thread == e.thread => {
                        return Err(TraceError::ReentrantAcquire {
                            at: position(i),
                            lock: name(),
                        })
                    }
                    Some(_) => {
                        return Err(TraceError::OverlappingCriticalSections {
                            at: position(i),
                            lock: name(),
                        })
                    }
                    None => holder[e.loc] = Some(i),
                },
                Kind::Release => match holder[e.loc] {
                    Some(h) if events[h].thread == e.thread => {
                        holder[e.loc] = None;
                        rf[i] = Some(h);
                        partner[i] = Some(h);
                        partner[h] = Some(i);
                    }
                    _ => {
                        return Err(TraceError::UnmatchedRelease {
                            at: position(i),
                            lock: name(),
                        })
                    }
                },
            }
        }
        if let Some(l) = holder.iter().position(Option::is_some) {
            return Err(TraceError::OpenCriticalSection {
                lock: loc_names[l].clone(),
            });
        }

        let lines = (0..n).map(&at).collect();
        let init_thread = (synthesized > 0).then(|| thread_ix[INIT_THREAD]);
        let rf_edges: Vec<(Ev, Ev)> = (0..n)
            .filter_map(|r| rf[r].map(|w| (w, r)))
            .filter(|&(w, r)| events[w].thread != events[r].thread)
            .collect();
        let trf = PartialOrder::from_edges(threads.clone(), &rf_edges)
            .expect("reads-from edges point forward in the trace");
        Ok(Trace {
            events,
            thread_names,
            loc_names,
            loc_is_lock,
            threads,
            pos,
            rf,
            partner,
            lines,
            init_thread,
            trf,
        })
    }

    /// Builds a trace from raw events with init synthesis disabled.
    pub fn from_events(raw: &[RawEvent]) -> Result<Trace, TraceError> {
        Self::from_raw(
            raw,
            ParseOptions {
                init_synthesis: false,
            },
        )
    }

    /// Number of events.
    #[must_use]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// True when the trace has no events.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The event at index `e`.
    #[must_use]
    pub fn event(&self, e: Ev) -> Event {
        self.events[e]
    }

    /// All events in trace order.
    #[must_use]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of threads.
    #[must_use]
    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    /// Events of thread `j` in thread order.
    #[must_use]
    pub fn thread_events(&self, j: usize) -> &[Ev] {
        &self.threads[j]
    }

    /// Per-thread event sequences.
    #[must_use]
    pub fn threads(&self) -> &[Vec<Ev>] {
        &self.threads
    }

    /// Position of `e` within its thread.
    #[must_use]
    pub fn pos(&self, e: Ev) -> usize {
        self.pos[e]
    }

    /// Thread name of thread index `j`.
    #[must_use]
    pub fn thread_name(&self, j: usize) -> &str {
        &self.thread_names[j]
    }

    /// Number of distinct locations (globals and locks).
    #[must_use]
    pub fn loc_count(&self) -> usize {
        self.loc_names.len()
    }

    /// Name of location `l`.
    #[must_use]
    pub fn loc_name(&self, l: usize) -> &str {
        &self.loc_names[l]
    }

    /// True when location `l` is a lock.
    #[must_use]
    pub fn loc_is_lock(&self, l: usize) -> bool {
        self.loc_is_lock[l]
    }

    /// Reads-from source of a read (its observed write) or a release (its
    /// matching acquire).
    #[must_use]
    pub fn rf(&self, e: Ev) -> Option<Ev> {
        self.rf[e]
    }

    /// Matching release of an acquire, or matching acquire of a release.
    #[must_use]
    pub fn matching(&self, e: Ev) -> Option<Ev> {
        self.partner[e]
    }

    /// Source line of the event, `None` for synthesized events.
    #[must_use]
    pub fn line(&self, e: Ev) -> Option<usize> {
        self.lines[e]
    }

    /// Event whose source line is `line`.
    #[must_use]
    pub fn event_at_line(&self, line: usize) -> Option<Ev> {
        self.lines.iter().position(|&l| l == Some(line))
    }

    /// True when `e` is a synthesized initial write.
    #[must_use]
    pub fn is_init(&self, e: Ev) -> bool {
        self.init_thread == Some(self.events[e].thread)
    }

    /// Number of synthesized initial writes.
    #[must_use]
    pub fn init_count(&self) -> usize {
        self.init_thread.map_or(0, |j| self.threads[j].len())
    }

    /// Two events conflict when they touch the same location and at least
    /// one of them is a write or an acquire.
    #[must_use]
    pub fn conflict(&self, a: Ev, b: Ev) -> bool {
        let (x, y) = (self.events[a], self.events[b]);
        x.loc == y.loc && (x.kind.is_writer() || y.kind.is_writer())
    }

    /// The thread-reads-from order: the transitive closure of thread order
    /// and all reads-from edges.
    #[must_use]
    pub fn trf(&self) -> &PartialOrder {
        &self.trf
    }

    /// The event sequence in the raw form accepted by [`Trace::from_raw`].
    #[must_use]
    pub fn to_raw(&self) -> Vec<RawEvent> {
        self.events
            .iter()
            .map(|e| {
                RawEvent::new(
                    self.thread_names[e.thread].clone(),
                    e.kind,
                    self.loc_names[e.loc].clone(),
                )
            })
            .collect()
    }

    /// Serializes in the file format, one event per line.
    #[must_use]
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!(
                "{} {} {}\n",
                self.thread_names[e.thread],
                e.kind.mnemonic(),
                self.loc_names[e.loc]
            ));
        }
        out
    }

    /// Human-readable label such as `t1:w(x)#3`.
    #[must_use]
    pub fn label(&self, e: Ev) -> String {
        let ev = self.events[e];
        format!(
            "{}:{}({})#{}",
            self.thread_names[ev.thread],
            ev.kind.mnemonic(),
            self.loc_names[ev.loc],
            e + 1
        )
    }

    /// Computes the trace parameters.
    #[must_use]
    pub fn params(&self) -> TraceParams {
        TraceParams::compute(self)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Derived parameters of a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceParams {
    /// Number of events.
    pub n: usize,
    /// Number of threads.
    pub k: usize,
    /// Number of distinct locations, globals and locks together.
    pub d: usize,
    /// Lock-nesting depth: the largest number of simultaneously open
    /// critical sections within one thread.
    pub gamma: usize,
    /// Lock-dependence factor: the largest number of acquires that can reach
    /// a single acquire in the lock-dependence graph; 0 without acquires.
    pub zeta: usize,
    /// Edges `(i, j)`, `i < j`, between threads executing conflicting events.
    pub topology: Vec<(usize, usize)>,
    /// Every connected component of the topology is a tree.
    pub topology_is_tree: bool,
    /// The topology is connected.
    pub topology_connected: bool,
}

impl TraceParams {
    fn compute(t: &Trace) -> TraceParams {
        let k = t.thread_count();
        let mut gamma = 0;
        for th in t.threads() {
            let mut open = 0usize;
            for &e in th {
                match t.event(e).kind {
                    Kind::Acquire => {
                        open += 1;
                        gamma = gamma.max(open);
                    }
                    Kind::Release => open -= 1,
                    _ => {}
                }
            }
        }

        let topology = topology_edges(t);
        let (is_forest, connected) = forest_shape(k, &topology);
        TraceParams {
            n: t.len(),
            k,
            d: t.loc_count(),
            gamma,
            zeta: lock_dependence_factor(t),
            topology,
            topology_is_tree: is_forest,
            topology_connected: connected,
        }
    }
}

/// Thread pairs executing conflicting events, sorted.
fn topology_edges(t: &Trace) -> Vec<(usize, usize)> {
    let k = t.thread_count();
    let mut writers = vec![vec![false; k]; t.loc_count()];
    let mut users = vec![vec![false; k]; t.loc_count()];
    for e in t.events() {
        users[e.loc][e.thread] = true;
        if e.kind.is_writer() {
            writers[e.loc][e.thread] = true;
        }
    }
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let linked = (0..t.loc_count())
                .any(|l| (writers[l][i] && users[l][j]) || (writers[l][j] && users[l][i]));
            if linked {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Returns `(acyclic, connected)` for an undirected graph on `k` nodes.
pub(crate) fn forest_shape(k: usize, edges: &[(usize, usize)]) -> (bool, bool) {
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut acyclic = true;
    let mut components = k;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            acyclic = false;
        } else {
            parent[ra] = rb;
            components -= 1;
        }
    }
    (acyclic, components <= 1)
}

/// Computes the lock-dependence factor from the lock-dependence graph.
fn lock_dependence_factor(t: &Trace) -> usize {
    let trf = t.trf();
    let acqs: Vec<Ev> = (0..t.len())
        .filter(|&e| t.event(e).kind == Kind::Acquire)
        .collect();
    let m = acqs.len();
    // preds[j] lists the acquires i with an edge (i, j).
    let mut preds = vec![Vec::new(); m];
    for (i, &a1) in acqs.iter().enumerate() {
        let r1 = t.matching(a1).expect("acquires are matched");
        for (j, &a2) in acqs.iter().enumerate() {
            let r2 = t.matching(a2).expect("acquires are matched");
            if !trf.less(a1, a2) && trf.less(a1, r2) && !trf.less(r1, r2) {
                preds[j].push(i);
            }
        }
    }
    let mut best = 0;
    for target in 0..m {
        let mut seen = vec![false; m];
        let mut stack = vec![target];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            for &p in &preds[v] {
                if !seen[p] {
                    seen[p] = true;
                    count += 1;
                    stack.push(p);
                }
            }
        }
        best = best.max(count);
    }
    best
}

/// Result of [`wrap_pair`]: the wrapped trace and the new query endpoints.
#[derive(Debug, Clone)]
pub struct WrappedPair {
    /// The wrapped trace.
    pub trace: Trace,
    /// Index of the first endpoint in the wrapped trace.
    pub e1: Ev,
    /// Index of the second endpoint in the wrapped trace.
    pub e2: Ev,
}

/// Builds a trace in which `(e1, e2)` is the only candidate race.
///
/// `e1` becomes `acq(l1) e1 rel(l1)`, `e2` becomes `acq(l2) e2 rel(l2)`, and
/// every other read or write `e` becomes `acq(l1) acq(l2) e rel(l2) rel(l1)`,
/// with `l1`, `l2` fresh locks. The wrapped trace has a predictable race iff
/// `(e1, e2)` is a predictable race of the input.
pub fn wrap_pair(t: &Trace, e1: Ev, e2: Ev) -> Result<WrappedPair, WrapError> {
    for e in [e1, e2] {
        if e >= t.len() {
            return Err(WrapError::OutOfRange(e + 1));
        }
    }
    let (a, b) = (t.event(e1), t.event(e2));
    if e1 == e2 || !a.kind.is_access() || !b.kind.is_access() || !t.conflict(e1, e2) {
        return Err(WrapError::NotConflicting(e1 + 1, e2 + 1));
    }
    let fresh = |base: &str| {
        let mut name = base.to_string();
        let mut i = 0;
        while t.loc_names.contains(&name) {
            i += 1;
            name = format!("{base}_{i}");
        }
        name
    };
    let l1 = fresh("wrap_l1");
    let l2 = fresh("wrap_l2");
    let mut raw = Vec::with_capacity(t.len() * 5);
    let (mut n1, mut n2) = (0, 0);
    for (i, ev) in t.to_raw().into_iter().enumerate() {
        let th = ev.thread.clone();
        let acq = |l: &str| RawEvent::new(th.clone(), Kind::Acquire, l);
        let rel = |l: &str| RawEvent::new(th.clone(), Kind::Release, l);
        if i == e1 || i == e2 {
            let l = if i == e1 { &l1 } else { &l2 };
            raw.push(acq(l));
            if i == e1 {
                n1 = raw.len();
            } else {
                n2 = raw.len();
            }
            raw.push(ev);
            raw.push(rel(l));
        } else if ev.kind.is_access() {
            raw.push(acq(&l1));
            raw.push(acq(&l2));
            raw.push(ev);
            raw.push(rel(&l2));
            raw.push(rel(&l1));
        } else {
            raw.push(ev);
        }
    }
    let trace = Trace::from_events(&raw).expect("wrapping preserves trace validity");
    Ok(WrappedPair {
        trace,
        e1: n1,
        e2: n2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: Option<Ev>) -> Option<usize> {
        v.map(|e| e + 1)
    }

    #[test]
    fn single_write_feeds_read() {
        let t = parse_trace("t1 w x\nt2 r x").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(ids(t.rf(1)), Some(1));
    }

    #[test]
    fn lock_matching_follows_semantics() {
        let t = parse_trace("t1 acq l\nt1 rel l\nt2 acq l\nt2 rel l").unwrap();
        assert_eq!(ids(t.matching(0)), Some(2));
        assert_eq!(ids(t.matching(2)), Some(4));
        assert_eq!(ids(t.rf(1)), Some(1));
    }

    #[test]
    fn overlapping_sections_rejected() {
        let err = parse_trace("t1 acq l\nt2 acq l\nt1 rel l\nt2 rel l").unwrap_err();
        assert!(matches!(
            err,
            TraceError::OverlappingCriticalSections { at: 2, .. }
        ));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            parse_trace("t1 rel l").unwrap_err(),
            TraceError::UnmatchedRelease { .. }
        ));
        assert!(matches!(
            parse_trace("t1 acq l\nt1 acq l\nt1 rel l\nt1 rel l").unwrap_err(),
            TraceError::ReentrantAcquire { .. }
        ));
        assert!(matches!(
            parse_trace("t1 acq l\nt1 w l\nt1 rel l").unwrap_err(),
            TraceError::RoleConflict { .. }
        ));
        assert!(matches!(
            parse_trace("t1 acq l").unwrap_err(),
            TraceError::OpenCriticalSection { .. }
        ));
        assert!(matches!(
            parse_trace("t1 w x y").unwrap_err(),
            TraceError::Malformed { line: 1, .. }
        ));
        assert!(matches!(
            parse_trace("x1 w x").unwrap_err(),
            TraceError::Malformed { .. }
        ));
        assert!(matches!(
            parse_trace("t1 write x").unwrap_err(),
            TraceError::Malformed { .. }
        ));
        assert!(matches!(
            parse_trace("t1 w 9x").unwrap_err(),
            TraceError::Malformed { .. }
        ));
        assert!(matches!(
            parse_trace("t1 rel l\nt2 acq l").unwrap_err(),
            TraceError::UnmatchedRelease { .. }
        ));
        let t2_releases_t1 = parse_trace("t1 acq l\nt2 rel l").unwrap_err();
        assert!(matches!(
            t2_releases_t1,
            TraceError::UnmatchedRelease { at: 2, .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let t = parse_trace("# header\n\n t1 w x   # trailing\n\nt2 r x\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.line(0), Some(3));
        assert_eq!(t.line(1), Some(5));
        assert_eq!(t.event_at_line(5), Some(1));
    }

    #[test]
    fn init_synthesis_prepends_writes() {
        let t = parse_trace("t1 r x\nt2 r y\nt2 w x\nt1 r y").unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.init_count(), 2);
        assert!(t.is_init(0) && t.is_init(1));
        assert_eq!(t.thread_name(t.event(0).thread), INIT_THREAD);
        assert_eq!(t.loc_name(t.event(0).loc), "x");
        assert_eq!(t.loc_name(t.event(1).loc), "y");
        assert_eq!(ids(t.rf(2)), Some(1));
        assert_eq!(ids(t.rf(5)), Some(2));
        assert_eq!(t.line(2), Some(1));
        assert_eq!(t.line(0), None);
    }

    #[test]
    fn strict_mode_rejects_unwritten_reads() {
        let opts = ParseOptions {
            init_synthesis: false,
        };
        let err = parse_trace_with("t1 w y\nt1 r x", opts).unwrap_err();
        assert_eq!(
            err,
            TraceError::UnwrittenRead {
                at: 2,
                loc: "x".into()
            }
        );
        assert_eq!(
            parse_trace("t0 w y\nt1 r x").unwrap_err(),
            TraceError::ReservedThread
        );
        assert!(parse_trace("t0 w x\nt1 r x").is_ok());
    }

    #[test]
    fn serialization_round_trip() {
        let src = "t1 acq l\nt1 w x\nt1 rel l\nt2 r x\nt3 w y\n";
        let t = parse_trace(src).unwrap();
        assert_eq!(t.to_text(), src);
        let again = parse_trace(&t.to_text()).unwrap();
        assert_eq!(again.to_text(), src);
    }

    #[test]
    fn params_lock_free_pair() {
        let t = parse_trace("t1 w x\nt2 w x").unwrap();
        let p = t.params();
        assert_eq!((p.n, p.k, p.d, p.gamma, p.zeta), (2, 2, 1, 0, 0));
        assert_eq!(p.topology, vec![(0, 1)]);
        assert!(p.topology_is_tree && p.topology_connected);
    }

    #[test]
    fn params_nesting_depth() {
        let t = parse_trace("t1 acq l\nt1 acq m\nt1 rel m\nt1 rel l").unwrap();
        assert_eq!(t.params().gamma, 2);
    }

    #[test]
    fn params_triangle_is_not_tree() {
        let t = parse_trace("t1 w x\nt2 r x\nt3 r x\nt2 w y\nt3 r y").unwrap();
        let p = t.params();
        assert_eq!(p.topology, vec![(0, 1), (0, 2), (1, 2)]);
        assert!(!p.topology_is_tree);
    }

    #[test]
    fn zeta_counts_reachable_acquires() {
        // Each acquire has a self-loop, so a lone critical section gives 1.
        let t = parse_trace("t1 acq l\nt1 w x\nt1 rel l").unwrap();
        assert_eq!(t.params().zeta, 1);
    }

    #[test]
    fn wrap_pair_counts() {
        let t = parse_trace("t1 w x\nt2 w x").unwrap();
        let w = wrap_pair(&t, 0, 1).unwrap();
        assert_eq!(w.trace.len(), 6);
        assert_eq!((w.e1, w.e2), (1, 4));
        let t = parse_trace("t1 w x\nt2 r x\nt2 w x").unwrap();
        let w = wrap_pair(&t, 0, 2).unwrap();
        assert_eq!(w.trace.len(), 11);
        assert!(wrap_pair(&t, 0, 0).is_err());
        assert!(wrap_pair(&t, 0, 9).is_err());
    }

    #[test]
    fn wrap_pair_rejects_non_conflicting() {
        let t = parse_trace("t1 r x\nt2 r x").unwrap();
        assert_eq!(
            wrap_pair(&t, 1, 2).unwrap_err(),
            WrapError::NotConflicting(2, 3)
        );
    }
}
