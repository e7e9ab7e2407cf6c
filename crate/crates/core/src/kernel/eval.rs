//! Stratified, semi-naive bottom-up evaluation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use rustc_hash::{FxHashMap, FxHashSet, FxHasher};
use serde::Serialize;
use smallvec::SmallVec;

use crate::knowledge::Theory;
use crate::logic::{Atom, Fact, Rule, Term, EQ, LT};
use crate::symbol::Sym;

use super::keys::KeyOrder;
use super::state::FactSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Var(usize),
    Const(Sym),
}

#[derive(Debug, Clone)]
enum Step {
    Scan { pred: Sym, args: Vec<Slot> },
    Absent { pred: Sym, args: Vec<Slot> },
    Lt(Slot, Slot),
    Eq(Slot, Slot),
}

#[derive(Debug, Clone)]
struct CompiledRule {
    head: Option<(Sym, Vec<Slot>)>,
    plan: Vec<Step>,
    vars: usize,
    text: String,
}

fn compile(rule: &Rule) -> CompiledRule {
    let mut names: Vec<Sym> = Vec::new();
    let slot = |t: &Term, names: &mut Vec<Sym>| match t {
        Term::Const(c) => Slot::Const(*c),
        Term::Var(v) => {
            let i = names.iter().position(|n| n == v).unwrap_or_else(|| {
                names.push(*v);
                names.len() - 1
            });
            Slot::Var(i)
        }
    };
    let body: Vec<(bool, Sym, Vec<Slot>, bool)> = rule
        .body
        .iter()
        .map(|l| {
            let args = l.atom.args.iter().map(|t| slot(t, &mut names)).collect();
            (l.negated, l.atom.pred, args, l.atom.is_comparison())
        })
        .collect();
    let head = rule
        .head
        .as_ref()
        .map(|h| (h.pred, h.args.iter().map(|t| slot(t, &mut names)).collect::<Vec<_>>()));

    // Greedy plan: scan the positive literal with most bound arguments,
    // then run every filter whose variables are bound.
    let mut bound = vec![false; names.len()];
    let mut done = vec![false; body.len()];
    let mut plan = Vec::new();
    let is_bound = |s: &Slot, bound: &[bool]| match s {
        Slot::Const(_) => true,
        Slot::Var(i) => bound[*i],
    };
    loop {
        let mut progressed = true;
        while progressed {
            progressed = false;
            for (i, (neg, pred, args, cmp)) in body.iter().enumerate() {
                if done[i] || !(*neg || *cmp) {
                    continue;
                }
                if args.iter().all(|a| is_bound(a, &bound)) {
                    done[i] = true;
                    progressed = true;
                    plan.push(if *cmp {
                        if pred.as_str() == LT {
                            Step::Lt(args[0], args[1])
                        } else {
                            Step::Eq(args[0], args[1])
                        }
                    } else {
                        Step::Absent {
                            pred: *pred,
                            args: args.clone(),
                        }
                    });
                }
            }
        }
        let next = body
            .iter()
            .enumerate()
            .filter(|(i, (neg, _, _, cmp))| !done[*i] && !neg && !cmp)
            .max_by_key(|(i, (_, _, args, _))| {
                (
                    args.iter().filter(|a| is_bound(a, &bound)).count(),
                    std::cmp::Reverse(*i),
                )
            })
            .map(|(i, _)| i);
        let Some(i) = next else { break };
        done[i] = true;
        let (_, pred, args, _) = &body[i];
        for a in args {
            if let Slot::Var(v) = a {
                bound[*v] = true;
            }
        }
        plan.push(Step::Scan {
            pred: *pred,
            args: args.clone(),
        });
    }
    // Unsafe leftovers (rejected at load time) are simply never satisfied.
    for (i, (neg, pred, args, cmp)) in body.iter().enumerate() {
        if !done[i] {
            plan.push(if *cmp {
                Step::Lt(args[0], args[1])
            } else if *neg {
                Step::Absent {
                    pred: *pred,
                    args: args.clone(),
                }
            } else {
                Step::Scan {
                    pred: *pred,
                    args: args.clone(),
                }
            });
        }
    }
    CompiledRule {
        head,
        plan,
        vars: names.len(),
        text: rule.to_string(),
    }
}

/// Tuples in insertion order, indexed by their first two arguments.
#[derive(Debug, Clone, Default)]
struct Relation {
    tuples: Vec<Vec<Sym>>,
    set: FxHashSet<Vec<Sym>>,
    index: [FxHashMap<Sym, Vec<usize>>; 2],
}

impl Relation {
    fn insert(&mut self, t: Vec<Sym>) -> bool {
        if self.set.contains(&t) {
            return false;
        }
        let id = self.tuples.len();
        for (i, v) in t.iter().take(2).enumerate() {
            self.index[i].entry(*v).or_default().push(id);
        }
        self.set.insert(t.clone());
        self.tuples.push(t);
        true
    }
}

/// The result of evaluating a theory over a base fact set.
#[derive(Debug, Clone, Default)]
pub struct Closure {
    rels: FxHashMap<Sym, Relation>,
}

static EMPTY: Vec<Vec<Sym>> = Vec::new();

impl Closure {
    pub fn contains(&self, f: &Fact) -> bool {
        self.rels.get(&f.pred).is_some_and(|r| r.set.contains(&f.args))
    }

    pub fn contains_tuple(&self, pred: Sym, args: &[Sym]) -> bool {
        self.rels.get(&pred).is_some_and(|r| r.set.contains(args))
    }

    pub fn holds(&self, pred: &str, args: &[&str]) -> bool {
        self.contains(&Fact::new(pred, args))
    }

    pub fn tuples(&self, pred: Sym) -> &[Vec<Sym>] {
        self.rels.get(&pred).map_or(&EMPTY[..], |r| &r.tuples[..])
    }

    pub fn facts(&self) -> BTreeSet<Fact> {
        self.rels
            .iter()
            .flat_map(|(p, r)| {
                r.tuples.iter().map(move |t| Fact {
                    pred: *p,
                    args: t.clone(),
                })
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rels.values().map(|r| r.tuples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&mut self, pred: Sym, t: Vec<Sym>) -> bool {
        self.rels.entry(pred).or_default().insert(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "constraint", rename_all = "snake_case")]
pub enum ConstraintCheck {
    Satisfied,
    Violated(String),
}

impl ConstraintCheck {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, ConstraintCheck::Satisfied)
    }
}

const CACHE_LIMIT: usize = 4096;

type CacheEntry = (FactSet, KeyOrder, Arc<Closure>);
type Buckets = FxHashMap<u64, Vec<CacheEntry>>;

/// Closures already computed, bucketed by a hash of `(facts, order)`.
#[derive(Clone, Default)]
struct ClosureCache(Arc<Mutex<(usize, Buckets)>>);

impl fmt::Debug for ClosureCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosureCache")
    }
}

/// A theory compiled once for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator {
    units: Vec<(Vec<CompiledRule>, BTreeSet<Sym>)>,
    constraints: Vec<CompiledRule>,
    invariants: Vec<Sym>,
    cache: ClosureCache,
}

impl Evaluator {
    pub fn new(theory: &Theory) -> Self {
        let units = theory
            .strata
            .iter()
            .map(|unit| {
                let rules: Vec<CompiledRule> = unit.iter().map(|&i| compile(&theory.rules[i])).collect();
                let preds = unit
                    .iter()
                    .filter_map(|&i| theory.rules[i].head.as_ref().map(|h| h.pred))
                    .collect();
                (rules, preds)
            })
            .collect();
        Evaluator {
            units,
            constraints: theory.constraints().map(compile).collect(),
            invariants: theory.invariants.iter().copied().collect(),
            cache: ClosureCache::default(),
        }
    }

    /// Like [`Evaluator::closure`], memoized on `(facts, order)`.
    pub fn closure_of(&self, facts: &FactSet, order: &KeyOrder) -> Arc<Closure> {
        let mut h = FxHasher::default();
        facts.hash(&mut h);
        order.hash(&mut h);
        let key = h.finish();
        let lookup = |map: &Buckets| {
            map.get(&key)?
                .iter()
                .find(|(f, o, _)| f == facts && o == order)
                .map(|(_, _, c)| c.clone())
        };
        if let Some(c) = lookup(&self.cache.0.lock().expect("cache poisoned").1) {
            return c;
        }
        let c = Arc::new(self.closure(facts, order));
        let mut guard = self.cache.0.lock().expect("cache poisoned");
        let (len, map) = &mut *guard;
        if *len >= CACHE_LIMIT {
            map.clear();
            *len = 0;
        }
        map.entry(key).or_default().push((facts.clone(), order.clone(), c.clone()));
        *len += 1;
        c
    }

    pub fn closure<'a>(&self, base: impl IntoIterator<Item = &'a Fact>, order: &KeyOrder) -> Closure {
        let mut db = Closure::default();
        for f in base {
            db.insert(f.pred, f.args.clone());
        }
        for (rules, preds) in &self.units {
            // First round over the full relations.
            let mut start: HashMap<Sym, usize> = HashMap::new();
            let mut derived: Vec<(Sym, Vec<Sym>)> = Vec::new();
            for r in rules {
                eval_rule(r, &db, order, None, &mut derived);
            }
            let mut changed = false;
            for p in preds {
                start.insert(*p, db.tuples(*p).len());
            }
            for (p, t) in derived.drain(..) {
                changed |= db.insert(p, t);
            }
            let recursive = rules.iter().any(|r| {
                r.plan
                    .iter()
                    .any(|s| matches!(s, Step::Scan { pred, .. } if preds.contains(pred)))
            });
            while changed && recursive {
                changed = false;
                let window: HashMap<Sym, (usize, usize)> = preds
                    .iter()
                    .map(|p| (*p, (start[p], db.tuples(*p).len())))
                    .collect();
                for r in rules {
                    for (pos, s) in r.plan.iter().enumerate() {
                        if let Step::Scan { pred, .. } = s {
                            if let Some(&(lo, hi)) = window.get(pred) {
                                if lo < hi {
                                    eval_rule(r, &db, order, Some((pos, lo, hi)), &mut derived);
                                }
                            }
                        }
                    }
                }
                for (p, (_, hi)) in &window {
                    start.insert(*p, *hi);
                }
                for (p, t) in derived.drain(..) {
                    changed |= db.insert(p, t);
                }
            }
        }
        db
    }

    /// First violated invariant (by name) or constraint (by text).
    pub fn check(&self, closure: &Closure, order: &KeyOrder) -> ConstraintCheck {
        for inv in &self.invariants {
            if closure.tuples(*inv).is_empty() {
                return ConstraintCheck::Violated(inv.to_string());
            }
        }
        for c in &self.constraints {
            if first_match(c, closure, order) {
                return ConstraintCheck::Violated(c.text.clone());
            }
        }
        ConstraintCheck::Satisfied
    }
}

fn resolve(s: Slot, env: &[Option<Sym>]) -> Option<Sym> {
    match s {
        Slot::Const(c) => Some(c),
        Slot::Var(i) => env[i],
    }
}

fn eval_rule(
    r: &CompiledRule,
    db: &Closure,
    order: &KeyOrder,
    delta: Option<(usize, usize, usize)>,
    out: &mut Vec<(Sym, Vec<Sym>)>,
) {
    let mut env = vec![None; r.vars];
    walk(r, 0, &mut env, db, order, delta, &mut |env| {
        if let Some((pred, args)) = &r.head {
            let t: Option<Vec<Sym>> = args.iter().map(|a| resolve(*a, env)).collect();
            if let Some(t) = t {
                out.push((*pred, t));
            }
        }
        false
    });
}

fn first_match(r: &CompiledRule, db: &Closure, order: &KeyOrder) -> bool {
    let mut env = vec![None; r.vars];
    walk(r, 0, &mut env, db, order, None, &mut |_| true)
}

/// Enumerates satisfying assignments; `emit` returns true to stop early.
fn walk(
    r: &CompiledRule,
    at: usize,
    env: &mut Vec<Option<Sym>>,
    db: &Closure,
    order: &KeyOrder,
    delta: Option<(usize, usize, usize)>,
    emit: &mut dyn FnMut(&[Option<Sym>]) -> bool,
) -> bool {
    let Some(step) = r.plan.get(at) else {
        return emit(env);
    };
    match step {
        Step::Lt(a, b) => match (resolve(*a, env), resolve(*b, env)) {
            (Some(x), Some(y)) if order.lt(x, y) => walk(r, at + 1, env, db, order, delta, emit),
            _ => false,
        },
        Step::Eq(a, b) => match (resolve(*a, env), resolve(*b, env)) {
            (Some(x), Some(y)) if order.eq(x, y) => walk(r, at + 1, env, db, order, delta, emit),
            _ => false,
        },
        Step::Absent { pred, args } => {
            let t: Option<SmallVec<[Sym; 6]>> = args.iter().map(|a| resolve(*a, env)).collect();
            match t {
                Some(t) if !db.contains_tuple(*pred, &t) => {
                    walk(r, at + 1, env, db, order, delta, emit)
                }
                _ => false,
            }
        }
        Step::Scan { pred, args, .. } => {
            let Some(rel) = db.rels.get(pred) else {
                return false;
            };
            let (lo, hi) = match delta {
                Some((pos, lo, hi)) if pos == at => (lo, hi),
                _ => (0, rel.tuples.len()),
            };
            let mut fresh: SmallVec<[usize; 6]> = SmallVec::new();
            for a in args {
                if let Slot::Var(i) = a {
                    if env[*i].is_none() && !fresh.contains(i) {
                        fresh.push(*i);
                    }
                }
            }
            let mut attempt = |t: &[Sym], env: &mut Vec<Option<Sym>>| -> bool {
                if t.len() != args.len() {
                    return false;
                }
                let mut ok = true;
                for (a, v) in args.iter().zip(t) {
                    match a {
                        Slot::Const(c) => ok = c == v,
                        Slot::Var(i) => match env[*i] {
                            Some(b) => ok = b == *v,
                            None => env[*i] = Some(*v),
                        },
                    }
                    if !ok {
                        break;
                    }
                }
                let stop = ok && walk(r, at + 1, env, db, order, delta, emit);
                for i in &fresh {
                    env[*i] = None;
                }
                stop
            };
            let key = args
                .iter()
                .take(2)
                .enumerate()
                .find_map(|(i, a)| resolve(*a, env).map(|v| (i, v)));
            match key {
                Some((i, v)) => {
                    let Some(ids) = rel.index[i].get(&v) else {
                        return false;
                    };
                    let from = ids.partition_point(|&id| id < lo);
                    for &id in &ids[from..] {
                        if id >= hi {
                            break;
                        }
                        if attempt(&rel.tuples[id], env) {
                            return true;
                        }
                    }
                }
                None => {
                    for t in &rel.tuples[lo..hi] {
                        if attempt(t, env) {
                            return true;
                        }
                    }
                }
            }
            false
        }
    }
}

/// Least model of `theory` over `base`, evaluated stratum by stratum.
pub fn least_fixpoint<'a>(
    theory: &Theory,
    base: impl IntoIterator<Item = &'a Fact>,
    order: &KeyOrder,
) -> Closure {
    Evaluator::new(theory).closure(base, order)
}

pub fn check_constraints(theory: &Theory, closure: &Closure, order: &KeyOrder) -> ConstraintCheck {
    Evaluator::new(theory).check(closure, order)
}

/// Ground key facts and comparison facts of an order, for reporting.
pub fn order_facts(order: &KeyOrder) -> Vec<Fact> {
    let mut out: Vec<Fact> = order
        .less_than_pairs()
        .into_iter()
        .map(|(a, b)| Fact {
            pred: Sym::new(LT),
            args: vec![a, b],
        })
        .collect();
    out.extend(order.equal_pairs().into_iter().map(|(a, b)| Fact {
        pred: Sym::new(EQ),
        args: vec![a, b],
    }));
    out
}

/// Evaluates one ground atom against a closure and order.
pub fn atom_holds(atom: &Atom, closure: &Closure, order: &KeyOrder) -> bool {
    let args: Vec<Sym> = atom.args.iter().map(|t| t.sym()).collect();
    if atom.is_comparison() {
        return if atom.pred.as_str() == LT {
            order.lt(args[0], args[1])
        } else {
            order.eq(args[0], args[1])
        };
    }
    closure.contains(&Fact {
        pred: atom.pred,
        args,
    })
}
