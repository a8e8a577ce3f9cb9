#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;

use racepred::generators::{gen_random_trace, RandomConfig};
use racepred::ideal_engine::{
    candidate_ideal_set, cone, feasibility, is_ideal, lcone, Feasibility, Ideal,
};
use racepred::oracle::{oracle_any_race, oracle_predict, oracle_realize_ideal};
use racepred::orders::RfPoset;
use racepred::predict::{conflicting_pairs, predict, Algo, Options};
use racepred::trace_model::{parse_trace, parse_trace_with, wrap_pair, Kind, ParseOptions, Trace};

const CAP: usize = 12;

fn small_trace() -> impl Strategy<Value = Trace> {
    (
        any::<u64>(),
        2usize..=10,
        1usize..=3,
        1usize..=3,
        0usize..=2,
        0.0f64..0.7,
        0.0f64..0.5,
    )
        .prop_map(|(seed, n, k, d_globals, d_locks, read_ratio, lock_ratio)| {
            let cfg = RandomConfig {
                seed,
                n,
                k,
                d_globals,
                d_locks,
                read_ratio,
                lock_ratio: if d_locks == 0 { 0.0 } else { lock_ratio },
                nesting_max: 2,
            };
            gen_random_trace(&cfg).expect("valid parameters")
        })
}

fn trace_with_pair() -> impl Strategy<Value = (Trace, usize, usize)> {
    small_trace()
        .prop_filter("needs a conflicting pair", |t| {
            !conflicting_pairs(t).is_empty()
        })
        .prop_flat_map(|t| {
            let count = conflicting_pairs(&t).len();
            (Just(t), 0..count)
        })
        .prop_map(|(t, i)| {
            let (a, b) = conflicting_pairs(&t)[i];
            (t, a, b)
        })
}

/// A canonical rf-poset of a random ideal with up to three extra edges.
fn poset_of<'t>(t: &'t Trace, cut_seed: &[usize], edges: &[(usize, usize)]) -> Option<RfPoset<'t>> {
    let cut: Vec<usize> = t
        .threads()
        .iter()
        .zip(cut_seed.iter().cycle())
        .map(|(th, s)| s % (th.len() + 1))
        .collect();
    let x = Ideal::from_cut(t, cut)?;
    let Feasibility::Feasible(mut p) = feasibility(&x) else {
        return None;
    };
    if p.is_empty() {
        return Some(p);
    }
    for &(a, b) in edges {
        let (a, b) = (a % p.len(), b % p.len());
        if a != b {
            let _ = p.order_mut().insert(a, b);
        }
    }
    Some(p)
}

/// Reachability matrix of thread order plus reads-from, by Floyd-Warshall.
fn trf_matrix(t: &Trace) -> Vec<Vec<bool>> {
    let n = t.len();
    let mut m = vec![vec![false; n]; n];
    for th in t.threads() {
        for w in th.windows(2) {
            m[w[0]][w[1]] = true;
        }
    }
    for e in 0..n {
        if let Some(src) = t.rf(e) {
            m[src][e] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn text_round_trip(t in small_trace()) {
        let back = parse_trace_with(&t.to_text(), ParseOptions { init_synthesis: false }).unwrap();
        prop_assert_eq!(back.to_text(), t.to_text());
        prop_assert_eq!(back.params(), t.params());
    }

    #[test]
    fn trf_matches_reachability(t in small_trace()) {
        let m = trf_matrix(&t);
        for a in 0..t.len() {
            for b in 0..t.len() {
                prop_assert_eq!(t.trf().less(a, b), m[a][b]);
            }
        }
    }

    #[test]
    fn nesting_and_lock_dependence(t in small_trace()) {
        let p = t.params();
        let mut gamma = 0;
        for th in t.threads() {
            for i in 0..th.len() {
                let open = th[..=i]
                    .iter()
                    .filter(|&&e| t.event(e).kind == Kind::Acquire && t.matching(e).is_none_or(|r| t.pos(r) > i))
                    .count();
                gamma = gamma.max(open);
            }
        }
        prop_assert_eq!(p.gamma, gamma);

        let m = trf_matrix(&t);
        let acqs: Vec<usize> = (0..t.len()).filter(|&e| t.event(e).kind == Kind::Acquire).collect();
        let n = acqs.len();
        let mut reach = vec![vec![false; n]; n];
        for (i, &a1) in acqs.iter().enumerate() {
            let r1 = t.matching(a1).unwrap();
            for (j, &a2) in acqs.iter().enumerate() {
                let r2 = t.matching(a2).unwrap();
                reach[i][j] = !m[a1][a2] && m[a1][r2] && !m[r1][r2];
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let zeta = (0..n).map(|j| (0..n).filter(|&i| reach[i][j]).count()).max().unwrap_or(0);
        prop_assert_eq!(p.zeta, zeta);
    }

    #[test]
    fn closure_is_the_weakest_closed_refinement(
        t in small_trace(),
        cut in prop::collection::vec(0usize..16, 3),
        edges in prop::collection::vec((0usize..16, 0usize..16), 0..4),
        more in prop::collection::vec((0usize..16, 0usize..16), 0..3),
    ) {
        let Some(p) = poset_of(&t, &cut, &edges) else { return Ok(()); };
        let Some(q) = p.closure() else { return Ok(()); };
        prop_assert!(q.is_closed());
        prop_assert!(q.order().refines(p.order()));
        prop_assert!(q.closure().unwrap().order().same_pairs(q.order()));
        // Any closed refinement of p refines its closure.
        let mut r = p.clone();
        for &(a, b) in &more {
            if !p.is_empty() && a % p.len() != b % p.len() {
                let _ = r.order_mut().insert(a % p.len(), b % p.len());
            }
        }
        if let Some(rc) = r.closure() {
            prop_assert!(rc.order().refines(q.order()));
        }
    }

    #[test]
    fn linearize_refines_the_order(
        t in small_trace(),
        cut in prop::collection::vec(0usize..16, 3),
        edges in prop::collection::vec((0usize..16, 0usize..16), 0..4),
    ) {
        let Some(p) = poset_of(&t, &cut, &edges) else { return Ok(()); };
        let lin = p.order().linearize();
        prop_assert!(p.order().is_linearization(&lin));
    }

    #[test]
    fn cone_is_the_least_enabling_ideal((t, e1, e2) in trace_with_pair()) {
        let x = cone(&t, &[e1, e2]);
        let m = trf_matrix(&t);
        let mut expected = Vec::new();
        for e in 0..t.len() {
            let needed = [e1, e2].iter().any(|&s| {
                let th = t.thread_events(t.event(s).thread);
                let p = t.pos(s);
                p > 0 && (th[p - 1] == e || m[e][th[p - 1]])
            });
            if needed {
                expected.push(e);
            }
        }
        prop_assert_eq!(x.members(), expected.clone());
        prop_assert!(is_ideal(&t, &expected));
    }

    #[test]
    fn oracle_is_symmetric((t, e1, e2) in trace_with_pair()) {
        prop_assert_eq!(
            oracle_predict(&t, e1, e2, CAP).unwrap(),
            oracle_predict(&t, e2, e1, CAP).unwrap()
        );
    }

    #[test]
    fn race_iff_some_candidate_ideal_is_realizable((t, e1, e2) in trace_with_pair()) {
        let oracle = oracle_predict(&t, e1, e2, CAP).unwrap();
        let via_cis = candidate_ideal_set(&t, e1, e2).iter().any(|x| {
            !x.contains(e1) && !x.contains(e2) && oracle_realize_ideal(x, CAP).unwrap().is_some()
        });
        prop_assert_eq!(oracle, via_cis);
    }

    #[test]
    fn race_iff_cone_union_is_realizable_on_trees((t, e1, e2) in trace_with_pair()) {
        if !t.params().topology_is_tree {
            return Ok(());
        }
        let x = lcone(&t, e1).unwrap().union(&lcone(&t, e2).unwrap());
        let via_cone = !x.contains(e1) && !x.contains(e2) && oracle_realize_ideal(&x, CAP).unwrap().is_some();
        prop_assert_eq!(oracle_predict(&t, e1, e2, CAP).unwrap(), via_cone);
    }

    #[test]
    fn backends_agree((t, e1, e2) in trace_with_pair()) {
        let oracle = oracle_predict(&t, e1, e2, CAP).unwrap();
        let mut algos = vec![Algo::Auto, Algo::General];
        if t.params().topology_is_tree {
            algos.push(Algo::Tree);
        }
        for algo in algos {
            prop_assert_eq!(predict(&t, e1, e2, &Options::with_algo(algo)).unwrap().race, oracle);
        }
        // Every write pair reversed at most once bounds the distance of any witness.
        let opts = Options { algo: Algo::Bounded, distance: Some(t.len() * t.len()), ..Options::default() };
        prop_assert_eq!(predict(&t, e1, e2, &opts).unwrap().race, oracle);
    }

    #[test]
    fn wrapped_pair_keeps_the_verdict((t, e1, e2) in trace_with_pair()) {
        let w = wrap_pair(&t, e1, e2).unwrap();
        if w.trace.len() > 24 {
            return Ok(());
        }
        prop_assert_eq!(
            oracle_predict(&t, e1, e2, CAP).unwrap(),
            oracle_any_race(&w.trace, 24).unwrap()
        );
        prop_assert_eq!(
            oracle_predict(&t, e1, e2, CAP).unwrap(),
            oracle_predict(&w.trace, w.e1, w.e2, 24).unwrap()
        );
    }
}

#[test]
fn init_synthesis_prepends_writes() {
    let t = parse_trace("t1 r x\nt2 w x").unwrap();
    assert_eq!(t.init_count(), 1);
    assert_eq!(t.len(), 3);
    assert!(t.is_init(0));
    assert_eq!(t.rf(1), Some(0));
}
