//! Race queries: endpoint validation, backend selection, and verified
//! verdicts.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::ideal_engine::{candidate_ideal_set, feasibility, lcone_counted, Feasibility, Ideal};
use crate::oracle::{self, OracleError, DEFAULT_CAP};
use crate::realizability::{check_tree_inducible, realize_bounded, realize_general, realize_tree};
use crate::trace_model::{Ev, Trace, TraceParams};

/// Decision procedure used to answer a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    /// Tree backend on tree topologies, general otherwise.
    Auto,
    /// Candidate ideal sweep with the ideal-graph search.
    General,
    /// Single lock-causal-cone ideal with the closure construction.
    Tree,
    /// Candidate ideal sweep with the reversal-bounded search.
    Bounded,
    /// Exhaustive search over correct reorderings.
    Bruteforce,
}

impl Algo {
    /// Lowercase name.
    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            Algo::Auto => "auto",
            Algo::General => "general",
            Algo::Tree => "tree",
            Algo::Bounded => "bounded",
            Algo::Bruteforce => "bruteforce",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Unknown backend name.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown algorithm `{0}`")]
pub struct UnknownAlgo(pub String);

impl FromStr for Algo {
    type Err = UnknownAlgo;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "auto" => Algo::Auto,
            "general" => Algo::General,
            "tree" => Algo::Tree,
            "bounded" => Algo::Bounded,
            "bruteforce" => Algo::Bruteforce,
            other => return Err(UnknownAlgo(other.to_string())),
        })
    }
}

/// Query settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Backend.
    pub algo: Algo,
    /// Reversal budget; required by [`Algo::Bounded`].
    pub distance: Option<usize>,
    /// Event cap for [`Algo::Bruteforce`].
    pub oracle_cap: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            algo: Algo::Auto,
            distance: None,
            oracle_cap: DEFAULT_CAP,
        }
    }
}

impl Options {
    /// Default options with the given backend.
    #[must_use]
    pub fn with_algo(algo: Algo) -> Self {
        Options {
            algo,
            ..Options::default()
        }
    }
}

/// Search counters of one query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    /// Size of the candidate ideal set, when it was built.
    pub cis_size: usize,
    /// Ideals whose realizability was decided.
    pub ideals_tested: usize,
    /// Ideal-graph states or bounded-search nodes.
    pub search_nodes: usize,
    /// Order edges inserted by closures.
    pub closure_edges: usize,
    /// Extra down-closure rounds taken by lock causal cones.
    pub lcone_rounds: usize,
    /// Times the tree route handed the query to the general route.
    pub tree_fallbacks: usize,
    /// Frontier sizes along the general witness.
    pub frontier_sizes: Vec<usize>,
    /// Reversed pairs of the bounded witness.
    pub reversals: Vec<(Ev, Ev)>,
    /// Wall time in microseconds.
    pub wall_time_us: u128,
}

/// Answer to a race query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    /// First endpoint.
    pub e1: Ev,
    /// Second endpoint.
    pub e2: Ev,
    /// Whether the pair is a predictable race.
    pub race: bool,
    /// A verified witness when `race` holds.
    pub witness: Option<Vec<Ev>>,
    /// Backend that decided the query.
    pub algorithm: Algo,
    /// Reversal count of the witness, for the bounded backend.
    pub distance: Option<usize>,
    /// The ideal whose realization is the witness.
    pub ideal: Option<Vec<Ev>>,
    /// Search counters.
    pub stats: Stats,
}

/// Query failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredictError {
    /// An event id outside the trace.
    #[error("event {0} does not exist")]
    OutOfRange(usize),
    /// Both endpoints are the same event.
    #[error("the endpoints are the same event {0}")]
    SameEvent(usize),
    /// An endpoint is a lock event.
    #[error("event {0} is not a read or write")]
    NotAccess(usize),
    /// An endpoint belongs to the synthesized init thread.
    #[error("event {0} is a synthesized initial write")]
    InitEvent(usize),
    /// The endpoints do not conflict.
    #[error("events {0} and {1} do not conflict")]
    NotConflicting(usize, usize),
    /// The bounded backend was requested without a budget.
    #[error("the bounded backend needs a distance")]
    MissingDistance,
    /// The tree backend was requested on a non-tree topology.
    #[error("the communication topology is not a forest")]
    NotTree,
    /// The brute-force oracle refused the input.
    #[error(transparent)]
    Oracle(#[from] OracleError),
    /// A backend produced a witness that failed verification.
    #[error("backend {0} produced an invalid witness: {1}")]
    InvalidWitness(Algo, String),
}

/// The backend [`Algo::Auto`] resolves to.
#[must_use]
pub fn recommended_backend(params: &TraceParams) -> Algo {
    if params.topology_is_tree {
        Algo::Tree
    } else {
        Algo::General
    }
}

/// Unordered pairs `(e1, e2)`, `e1 < e2`, of conflicting reads/writes,
/// excluding synthesized initial writes.
#[must_use]
pub fn conflicting_pairs(t: &Trace) -> Vec<(Ev, Ev)> {
    let mut out = Vec::new();
    for a in 0..t.len() {
        if t.is_init(a) || !t.event(a).kind.is_access() {
            continue;
        }
        for b in a + 1..t.len() {
            if !t.is_init(b) && t.event(b).kind.is_access() && t.conflict(a, b) {
                out.push((a, b));
            }
        }
    }
    out
}

fn validate(t: &Trace, e1: Ev, e2: Ev) -> Result<(), PredictError> {
    for e in [e1, e2] {
        if e >= t.len() {
            return Err(PredictError::OutOfRange(e + 1));
        }
        if !t.event(e).kind.is_access() {
            return Err(PredictError::NotAccess(e + 1));
        }
        if t.is_init(e) {
            return Err(PredictError::InitEvent(e + 1));
        }
    }
    if e1 == e2 {
        return Err(PredictError::SameEvent(e1 + 1));
    }
    if !t.conflict(e1, e2) {
        return Err(PredictError::NotConflicting(e1 + 1, e2 + 1));
    }
    Ok(())
}

struct Found {
    witness: Vec<Ev>,
    ideal: Option<Vec<Ev>>,
}

/// Decides whether `(e1, e2)` is a predictable race of `t`. Every returned
/// witness has been verified against the trace.
pub fn predict(t: &Trace, e1: Ev, e2: Ev, opts: &Options) -> Result<Verdict, PredictError> {
    validate(t, e1, e2)?;
    let start = Instant::now();
    let mut stats = Stats::default();
    let params = t.params();
    let algo = match opts.algo {
        Algo::Auto => recommended_backend(&params),
        Algo::Tree if !params.topology_is_tree => return Err(PredictError::NotTree),
        Algo::Bounded if opts.distance.is_none() => return Err(PredictError::MissingDistance),
        other => other,
    };
    let same_thread = t.event(e1).thread == t.event(e2).thread;
    let mut used = algo;
    let found = if same_thread {
        None
    } else {
        match algo {
            Algo::General => general_route(t, e1, e2, &mut stats),
            Algo::Tree => match tree_route(t, e1, e2, &mut stats) {
                Some(outcome) => outcome,
                None => {
                    stats.tree_fallbacks += 1;
                    used = Algo::General;
                    general_route(t, e1, e2, &mut stats)
                }
            },
            Algo::Bounded => {
                bounded_route(t, e1, e2, opts.distance.unwrap_or_default(), &mut stats)
            }
            Algo::Bruteforce => {
                oracle::oracle_witness(t, e1, e2, opts.oracle_cap)?.map(|witness| Found {
                    witness,
                    ideal: None,
                })
            }
            Algo::Auto => unreachable!("auto is resolved above"),
        }
    };
    if let Some(f) = &found {
        oracle::verify_witness_detailed(t, &f.witness, e1, e2)
            .map_err(|err| PredictError::InvalidWitness(used, err.to_string()))?;
    }
    let distance = match (&found, algo) {
        (Some(f), Algo::Bounded) => Some(oracle::distance(t, &f.witness)),
        _ => None,
    };
    stats.wall_time_us = start.elapsed().as_micros();
    Ok(Verdict {
        e1,
        e2,
        race: found.is_some(),
        witness: found.as_ref().map(|f| f.witness.clone()),
        algorithm: used,
        distance,
        ideal: found.and_then(|f| f.ideal),
        stats,
    })
}

fn general_route(t: &Trace, e1: Ev, e2: Ev, stats: &mut Stats) -> Option<Found> {
    let cis = candidate_ideal_set(t, e1, e2);
    stats.cis_size = cis.len();
    for x in &cis {
        if x.contains(e1) || x.contains(e2) {
            continue;
        }
        let Feasibility::Feasible(p) = feasibility(x) else {
            continue;
        };
        stats.ideals_tested += 1;
        let out = realize_general(&p);
        stats.search_nodes += out.stats.visited;
        stats.closure_edges += out.stats.closure_edges;
        if let Some(witness) = out.witness {
            stats.frontier_sizes = out.stats.frontier_sizes;
            return Some(Found {
                witness,
                ideal: Some(x.members()),
            });
        }
    }
    None
}

/// The single-ideal route. The outer `None` hands the query to the general
/// route.
fn tree_route(t: &Trace, e1: Ev, e2: Ev, stats: &mut Stats) -> Option<Option<Found>> {
    let (x1, r1) = lcone_counted(t, e1).ok()?;
    let (x2, r2) = lcone_counted(t, e2).ok()?;
    stats.lcone_rounds += r1 + r2;
    let x: Ideal<'_> = x1.union(&x2);
    if x.contains(e1) || x.contains(e2) {
        return Some(None);
    }
    let Feasibility::Feasible(p) = feasibility(&x) else {
        return Some(None);
    };
    let tp = check_tree_inducible(&p)?;
    stats.ideals_tested += 1;
    let out = realize_tree(&p, &tp).ok()?;
    stats.closure_edges += out.closure_edges;
    Some(out.witness.map(|witness| Found {
        witness,
        ideal: Some(x.members()),
    }))
}

fn bounded_route(t: &Trace, e1: Ev, e2: Ev, ell: usize, stats: &mut Stats) -> Option<Found> {
    let cis = candidate_ideal_set(t, e1, e2);
    stats.cis_size = cis.len();
    for x in &cis {
        if x.contains(e1) || x.contains(e2) {
            continue;
        }
        let Feasibility::Feasible(p) = feasibility(x) else {
            continue;
        };
        stats.ideals_tested += 1;
        let out = realize_bounded(&p, ell);
        stats.search_nodes += out.stats.nodes;
        if let Some(witness) = out.witness {
            stats.reversals = out.reversals;
            return Some(Found {
                witness,
                ideal: Some(x.members()),
            });
        }
    }
    None
}

/// Answers every pair of [`conflicting_pairs`].
pub fn scan(t: &Trace, opts: &Options) -> Result<Vec<Verdict>, PredictError> {
    conflicting_pairs(t)
        .into_iter()
        .map(|(a, b)| predict(t, a, b, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::parse_trace;

    const LOCKED: &str = "t1 acq l\nt1 w x\nt1 rel l\nt2 acq l\nt2 w x\nt2 rel l";

    #[test]
    fn two_writes_race_with_empty_witness() {
        let t = parse_trace("t1 w x\nt2 w x").unwrap();
        for algo in [Algo::Auto, Algo::General, Algo::Tree, Algo::Bruteforce] {
            let v = predict(&t, 0, 1, &Options::with_algo(algo)).unwrap();
            assert!(v.race, "{algo}");
            assert_eq!(v.witness, Some(vec![]));
        }
    }

    #[test]
    fn lock_protected_writes_do_not_race() {
        let t = parse_trace(LOCKED).unwrap();
        for algo in [Algo::Auto, Algo::General, Algo::Tree, Algo::Bruteforce] {
            assert!(!predict(&t, 1, 4, &Options::with_algo(algo)).unwrap().race);
        }
        let opts = Options {
            algo: Algo::Bounded,
            distance: Some(2),
            ..Options::default()
        };
        assert!(!predict(&t, 1, 4, &opts).unwrap().race);
    }

    #[test]
    fn endpoint_validation() {
        // The read of y gets a synthesized initial write as event 1.
        let t = parse_trace("t1 w x\nt2 r y\nt1 acq l\nt1 rel l\nt2 r x").unwrap();
        let o = Options::default();
        assert_eq!(
            predict(&t, 1, 2, &o),
            Err(PredictError::NotConflicting(2, 3))
        );
        assert_eq!(predict(&t, 1, 3, &o), Err(PredictError::NotAccess(4)));
        assert_eq!(predict(&t, 0, 2, &o), Err(PredictError::InitEvent(1)));
        assert_eq!(predict(&t, 2, 99, &o), Err(PredictError::OutOfRange(100)));
        let bounded = Options::with_algo(Algo::Bounded);
        assert_eq!(
            predict(&t, 1, 5, &bounded),
            Err(PredictError::MissingDistance)
        );
    }

    #[test]
    fn same_thread_pairs_are_not_races() {
        let t = parse_trace("t1 w x\nt1 w x").unwrap();
        let v = predict(&t, 0, 1, &Options::default()).unwrap();
        assert!(!v.race);
        assert_eq!(
            scan(&t, &Options::default())
                .unwrap()
                .iter()
                .filter(|v| v.race)
                .count(),
            0
        );
    }

    #[test]
    fn scan_two_writes() {
        let t = parse_trace("t1 w x\nt2 w x").unwrap();
        let vs = scan(&t, &Options::default()).unwrap();
        assert_eq!(vs.len(), 1);
        assert!(vs[0].race);
    }

    #[test]
    fn bounded_reports_distance() {
        let t = parse_trace("t1 acq l\nt1 w x\nt1 rel l\nt2 acq l\nt2 rel l\nt2 w x").unwrap();
        let mut opts = Options {
            algo: Algo::Bounded,
            distance: Some(0),
            ..Options::default()
        };
        assert!(!predict(&t, 1, 5, &opts).unwrap().race);
        opts.distance = Some(1);
        let v = predict(&t, 1, 5, &opts).unwrap();
        assert!(v.race);
        assert_eq!(v.distance, Some(1));
    }

    #[test]
    fn tree_topology_rejected_when_cyclic() {
        let t = parse_trace("t1 w x\nt2 w x\nt2 w y\nt3 w y\nt3 w z\nt1 w z").unwrap();
        assert_eq!(
            predict(&t, 0, 1, &Options::with_algo(Algo::Tree)),
            Err(PredictError::NotTree)
        );
        assert_eq!(
            predict(&t, 0, 1, &Options::default()).unwrap().algorithm,
            Algo::General
        );
    }
}
