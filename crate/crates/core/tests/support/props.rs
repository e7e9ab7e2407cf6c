//! Kernel properties over random small instances, each checked against
//! an independent oracle where one exists.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use lockweave::kernel::{apply_effects_atomic, least_fixpoint, FactSet, KeyOrder};
use lockweave::knowledge::{parse_operations, parse_theory, GroundStep, Operations, Theory};
use lockweave::logic::Fact;
use lockweave::symbol::Sym;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

const NODES: [&str; 5] = ["h", "a", "b", "c", "d"];
const KEYS: [&str; 5] = ["k0", "k1", "k2", "k3", "k4"];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn reach_theory() -> Theory {
    parse_theory(
        "reach(h).
         reach(Y) :- reach(X), edge(X, Y).
         path(X, Y) :- edge(X, Y).
         path(X, Z) :- path(X, Y), edge(Y, Z).
         cyclic(X) :- path(X, X).",
    )
    .unwrap()
}

fn stratified_theory() -> Theory {
    parse_theory(
        "reach(h).
         reach(Y) :- reach(X), edge(X, Y).
         node(X) :- edge(X, Y).
         node(Y) :- edge(X, Y).
         lost(X) :- node(X), not reach(X).
         sink(X) :- reach(X), not has_out(X).
         has_out(X) :- edge(X, Y).
         clean :- not dirty.
         dirty :- lost(X).",
    )
    .unwrap()
}

type Edges = BTreeSet<(usize, usize)>;

fn edges() -> impl Strategy<Value = Edges> {
    prop::collection::btree_set((0..NODES.len(), 0..NODES.len()), 0..12)
}

fn facts(es: &Edges) -> FactSet {
    es.iter().map(|&(a, b)| Fact::new("edge", &[NODES[a], NODES[b]])).collect()
}

fn closure(t: &Theory, base: &FactSet) -> BTreeSet<Fact> {
    least_fixpoint(t, base, &KeyOrder::new()).facts()
}

/// Breadth-first reachability from `h`.
fn reachable(es: &Edges) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([0]);
    let mut queue = VecDeque::from([0]);
    while let Some(n) = queue.pop_front() {
        for &(a, b) in es {
            if a == n && seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    seen
}

pub fn fixpoint_is_idempotent(cases: u32) -> Result<(), String> {
    let theories = [reach_theory(), stratified_theory()];
    runner(cases)
        .run(&edges(), |es| {
            for t in &theories {
                let once = closure(t, &facts(&es));
                let twice = closure(t, &once.iter().cloned().collect());
                prop_assert_eq!(once, twice);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn positive_fixpoint_is_monotone(cases: u32) -> Result<(), String> {
    let t = reach_theory();
    runner(cases)
        .run(&(edges(), edges()), |(es, extra)| {
            let small = closure(&t, &facts(&es));
            let all: Edges = es.union(&extra).copied().collect();
            let big = closure(&t, &facts(&all));
            prop_assert!(small.is_subset(&big));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn reachability_matches_search(cases: u32) -> Result<(), String> {
    let (t, st) = (reach_theory(), stratified_theory());
    runner(cases)
        .run(&edges(), |es| {
            let c = closure(&t, &facts(&es));
            let r = reachable(&es);
            let derived: BTreeSet<usize> = (0..NODES.len())
                .filter(|&i| c.contains(&Fact::new("reach", &[NODES[i]])))
                .collect();
            prop_assert_eq!(&derived, &r);
            let s = closure(&st, &facts(&es));
            let lost = es.iter().flat_map(|&(a, b)| [a, b]).any(|n| !r.contains(&n));
            prop_assert_eq!(s.contains(&Fact::new("clean", &[])), !lost);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn tree_ops() -> Operations {
    parse_operations(
        "operation(op).
         atomic_step(link_left). atomic_step(link_right). atomic_step(set_color).
         modifies(link_left(x,y), x). causes(link_left(x,y), left(x,y)).
         modifies(link_right(x,y), x). causes(link_right(x,y), right(x,y)).
         modifies(set_color(x,c), x). causes(set_color(x,c), color(x,c)).
         precondition(op, [left(x, y)]). program_steps(op, [link_left(x, y)]).",
    )
    .unwrap()
}

fn colour(i: usize) -> &'static str {
    ["red", "black"][i % 2]
}

fn tree_state() -> impl Strategy<Value = FactSet> {
    let field = prop::sample::select(vec!["left", "right", "color"]);
    prop::collection::btree_set((field, 0..NODES.len(), 0..NODES.len()), 0..12).prop_map(|fs| {
        fs.into_iter()
            .map(|(f, a, b)| {
                let v = if f == "color" { colour(b) } else { NODES[b] };
                Fact::new(f, &[NODES[a], v])
            })
            .collect()
    })
}

fn tree_steps() -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0..3usize, 0..NODES.len(), 0..NODES.len()), 1..4)
}

/// Facts outside the written (node, field) cells carry over; each written
/// cell holds exactly what the steps caused.
pub fn inertia_frame(cases: u32) -> Result<(), String> {
    let ops = tree_ops();
    runner(cases)
        .run(&(tree_state(), tree_steps()), |(state, raw)| {
            let steps: Vec<GroundStep> = raw
                .iter()
                .map(|&(k, a, b)| match k {
                    0 => GroundStep::new("link_left", &[NODES[a], NODES[b]]),
                    1 => GroundStep::new("link_right", &[NODES[a], NODES[b]]),
                    _ => GroundStep::new("set_color", &[NODES[a], colour(b)]),
                })
                .collect();
            let effects: Vec<_> = steps.iter().map(|s| ops.effect(s)).collect();
            let next = apply_effects_atomic(&state, &effects);

            let mut written: BTreeMap<(String, String), BTreeSet<Fact>> = BTreeMap::new();
            for s in &steps {
                let rel = match s.kind.as_str() {
                    "link_left" => "left",
                    "link_right" => "right",
                    _ => "color",
                };
                let f = Fact::new(rel, &[s.args[0].as_str(), s.args[1].as_str()]);
                written.entry((rel.to_string(), s.args[0].to_string())).or_default().insert(f);
            }
            let cell = |f: &Fact| (f.pred.to_string(), f.args[0].to_string());
            for f in &state {
                if !written.contains_key(&cell(f)) {
                    prop_assert!(next.contains(f), "{} lost", f);
                }
            }
            for f in &next {
                match written.get(&cell(f)) {
                    Some(caused) => prop_assert!(caused.contains(f), "{} survived a write", f),
                    None => prop_assert!(state.contains(f), "{} appeared", f),
                }
            }
            for caused in written.values() {
                prop_assert!(caused.is_subset(&next));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Cycle oracle: merge `eq` classes, then look for a class reaching
/// itself through `lt` (Floyd-Warshall over the classes).
fn has_cycle(lt: &[(usize, usize)], eq: &[(usize, usize)]) -> bool {
    let n = KEYS.len();
    let mut class: Vec<usize> = (0..n).collect();
    for _ in 0..n {
        for &(a, b) in eq {
            let (ca, cb) = (class[a], class[b]);
            for c in class.iter_mut() {
                if *c == ca || *c == cb {
                    *c = ca.min(cb);
                }
            }
        }
    }
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in lt {
        r[class[a]][class[b]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    (0..n).any(|i| r[i][i])
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..KEYS.len(), 0..KEYS.len()), 0..max)
}

fn check_order(lt: &[(usize, usize)], eq: &[(usize, usize)]) -> Result<(), TestCaseError> {
    let s = |i: usize| Sym::new(KEYS[i]);
    let lt_s: Vec<(Sym, Sym)> = lt.iter().map(|&(a, b)| (s(a), s(b))).collect();
    let eq_s: Vec<(Sym, Sym)> = eq.iter().map(|&(a, b)| (s(a), s(b))).collect();
    let result = KeyOrder::closure(&lt_s, &eq_s);
    prop_assert_eq!(result.is_err(), has_cycle(lt, eq));
    if let Ok(o) = result {
        for &(a, b) in &lt_s {
            prop_assert!(o.lt(a, b));
        }
        for &(a, b) in &eq_s {
            prop_assert!(o.eq(a, b));
        }
        let keys: Vec<Sym> = o.keys().collect();
        for &a in &keys {
            prop_assert!(!o.lt(a, a));
            for &b in &keys {
                for &c in &keys {
                    if o.lt(a, b) && o.lt(b, c) {
                        prop_assert!(o.lt(a, c));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Closure fails exactly on cyclic inputs; otherwise it is irreflexive,
/// transitive and contains every input pair.
pub fn key_order_cycles_are_detected(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(pairs(8), pairs(3)), |(lt, eq)| check_order(&lt, &eq))
        .map_err(|e| e.to_string())
}
