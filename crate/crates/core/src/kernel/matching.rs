//! Matching block preconditions against concrete states.
//!
//! Precondition symbols are pattern variables unless declared constant.
//! Nodes under a negated reachability literal are fresh: they are bound
//! to designated new constants, and their keys are placed at every
//! position of the current key order in turn.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::knowledge::operations::{BlockSpec, Operations};
use crate::knowledge::Theory;
use crate::logic::{Atom, Fact, Literal, Term, LT};
use crate::symbol::Sym;

use super::eval::{Closure, Evaluator};
use super::keys::{KeyOrder, Placement};
use super::state::FactSet;

/// Precondition of one block, split by role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPattern {
    pub fresh_nodes: Vec<Sym>,
    /// Fresh key symbols with the fresh node owning each, if any.
    pub fresh_keys: Vec<(Sym, Option<Sym>)>,
    pub node_vars: Vec<Sym>,
    pub key_vars: Vec<Sym>,
    pub constants: BTreeSet<Sym>,
    pub literals: Vec<Literal>,
}

impl BlockPattern {
    pub fn new(theory: &Theory, ops: &Operations, block: &BlockSpec) -> BlockPattern {
        let key = Sym::new("key");
        let mut constants = ops.constants.clone();
        for (_, dom) in &theory.meta.attributes {
            constants.extend(dom.iter().copied());
        }
        let reach = theory.meta.reachability;
        let mut fresh_nodes = Vec::new();
        for l in &block.precondition {
            if l.negated && Some(l.atom.pred) == reach && l.atom.args.len() == 1 {
                let n = l.atom.args[0].sym();
                if !fresh_nodes.contains(&n) && !constants.contains(&n) {
                    fresh_nodes.push(n);
                }
            }
        }
        let mut key_syms = Vec::new();
        let mut owner: BTreeMap<Sym, Sym> = BTreeMap::new();
        for l in &block.precondition {
            let a = &l.atom;
            if a.pred == key && a.args.len() == 2 && !l.negated {
                let k = a.args[1].sym();
                owner.entry(k).or_insert(a.args[0].sym());
                if !key_syms.contains(&k) {
                    key_syms.push(k);
                }
            } else if a.is_comparison() {
                for t in &a.args {
                    let k = t.sym();
                    if !key_syms.contains(&k) && !constants.contains(&k) {
                        key_syms.push(k);
                    }
                }
            }
        }
        let mut fresh_keys = Vec::new();
        let mut key_vars = Vec::new();
        for k in key_syms {
            match owner.get(&k) {
                Some(n) if fresh_nodes.contains(n) => fresh_keys.push((k, Some(*n))),
                Some(_) => key_vars.push(k),
                None => fresh_keys.push((k, None)),
            }
        }
        let mut node_vars = Vec::new();
        for s in block.mentioned_symbols() {
            if constants.contains(&s)
                || fresh_nodes.contains(&s)
                || key_vars.contains(&s)
                || fresh_keys.iter().any(|(k, _)| *k == s)
            {
                continue;
            }
            node_vars.push(s);
        }
        BlockPattern {
            fresh_nodes,
            fresh_keys,
            node_vars,
            key_vars,
            constants,
            literals: block.precondition.clone(),
        }
    }
}

/// A substitution of a block's pattern symbols by state constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Binding {
    /// Pattern symbol to constant, for nodes, keys and fresh symbols.
    pub map: BTreeMap<Sym, Sym>,
    pub fresh_nodes: Vec<Sym>,
    pub fresh_keys: Vec<Sym>,
    #[serde(skip)]
    pub placements: Vec<Placement>,
}

impl Binding {
    pub fn get(&self, pattern: Sym) -> Option<Sym> {
        self.map.get(&pattern).copied()
    }

    /// Image of a pattern symbol; constants map to themselves.
    pub fn image(&self, s: Sym) -> Sym {
        self.map.get(&s).copied().unwrap_or(s)
    }

    /// `key(node, key)` facts introduced for fresh nodes.
    pub fn fresh_facts(&self, pattern: &BlockPattern) -> Vec<Fact> {
        pattern
            .fresh_keys
            .iter()
            .filter_map(|(k, owner)| {
                owner.map(|n| Fact {
                    pred: Sym::new("key"),
                    args: vec![self.image(n), self.image(*k)],
                })
            })
            .collect()
    }

    pub fn ground(&self, atom: &Atom) -> Atom {
        Atom {
            pred: atom.pred,
            args: atom.args.iter().map(|t| Term::Const(self.image(t.sym()))).collect(),
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.map.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Names for fresh constants of one match.
pub trait FreshNames {
    fn node(&self, pattern: Sym) -> Sym;
    fn key(&self, pattern: Sym, owner: Option<Sym>) -> Sym {
        match owner {
            Some(n) => Sym::new(&format!("k{}", self.node(n))),
            None => Sym::new(&format!("{pattern}{}", self.suffix())),
        }
    }
    fn suffix(&self) -> String {
        String::new()
    }
}

/// Fresh constants named after the pattern symbols themselves.
pub struct PatternNames;

impl FreshNames for PatternNames {
    fn node(&self, pattern: Sym) -> Sym {
        pattern
    }
}

/// Fresh constants decorated with a suffix such as a prime.
pub struct Suffixed(pub String);

impl FreshNames for Suffixed {
    fn node(&self, pattern: Sym) -> Sym {
        Sym::new(&format!("{pattern}{}", self.0))
    }
    fn suffix(&self) -> String {
        self.0.clone()
    }
}

/// A requirement on a deferred (attribute) literal.
pub type Requirement = (bool, Fact);

/// Every binding of `pattern` over `(facts, order)`.
pub fn match_block(
    eval: &Evaluator,
    pattern: &BlockPattern,
    facts: &FactSet,
    order: &KeyOrder,
    names: &dyn FreshNames,
) -> Vec<Binding> {
    match_block_deferred(eval, pattern, facts, order, names, &BTreeSet::new())
        .into_iter()
        .map(|(b, _)| b)
        .collect()
}

/// Like [`match_block`], but literals over `deferred` predicates are not
/// checked; they are returned as requirements on the binding instead.
pub fn match_block_deferred(
    eval: &Evaluator,
    pattern: &BlockPattern,
    facts: &FactSet,
    order: &KeyOrder,
    names: &dyn FreshNames,
    deferred: &BTreeSet<Sym>,
) -> Vec<(Binding, Vec<Requirement>)> {
    match_general(eval, pattern, facts, order, names, deferred, &BTreeMap::new())
}

/// Bindings that agree with `pinned` on the pattern symbols it maps.
///
/// Pinned fresh keys must already be in `order` and are not placed again;
/// the binding's `fresh_keys` and `placements` list only the keys that
/// were placed.
pub fn match_block_pinned(
    eval: &Evaluator,
    pattern: &BlockPattern,
    facts: &FactSet,
    order: &KeyOrder,
    names: &dyn FreshNames,
    pinned: &BTreeMap<Sym, Sym>,
) -> Vec<Binding> {
    let relevant: BTreeMap<Sym, Sym> = pinned
        .iter()
        .filter(|(k, _)| {
            pattern.node_vars.contains(k)
                || pattern.key_vars.contains(k)
                || pattern.fresh_nodes.contains(k)
                || pattern.fresh_keys.iter().any(|(f, _)| f == *k)
        })
        .map(|(k, v)| (*k, *v))
        .collect();
    match_general(eval, pattern, facts, order, names, &BTreeSet::new(), &relevant)
        .into_iter()
        .map(|(b, _)| b)
        .collect()
}

fn match_general(
    eval: &Evaluator,
    pattern: &BlockPattern,
    facts: &FactSet,
    order: &KeyOrder,
    names: &dyn FreshNames,
    deferred: &BTreeSet<Sym>,
    pinned: &BTreeMap<Sym, Sym>,
) -> Vec<(Binding, Vec<Requirement>)> {
    let mut fixed: BTreeMap<Sym, Sym> = pinned.clone();
    for n in &pattern.fresh_nodes {
        fixed.entry(*n).or_insert_with(|| names.node(*n));
    }
    let all_key_consts: Vec<Sym> = pattern
        .fresh_keys
        .iter()
        .map(|(k, owner)| pinned.get(k).copied().unwrap_or_else(|| names.key(*k, *owner)))
        .collect();
    let fresh_key_consts: Vec<Sym> = pattern
        .fresh_keys
        .iter()
        .zip(&all_key_consts)
        .filter(|((k, _), _)| !pinned.contains_key(k))
        .map(|(_, c)| *c)
        .collect();
    for ((k, _), c) in pattern.fresh_keys.iter().zip(&all_key_consts) {
        fixed.insert(*k, *c);
    }
    let fresh_facts: Vec<Fact> = pattern
        .fresh_keys
        .iter()
        .zip(&all_key_consts)
        .filter_map(|((_, owner), c)| {
            owner.map(|n| Fact {
                pred: Sym::new("key"),
                args: vec![fixed[&n], *c],
            })
        })
        .collect();

    let mut out = Vec::new();
    for (placements, ord) in placements_of(order, &fresh_key_consts) {
        let mut base = facts.clone();
        base.extend(fresh_facts.iter().cloned());
        let closure = eval.closure_of(&base, &ord);
        for (map, reqs) in join(pattern, &closure, &ord, &fixed, deferred) {
            out.push((
                Binding {
                    map,
                    fresh_nodes: pattern.fresh_nodes.iter().map(|n| fixed[n]).collect(),
                    fresh_keys: fresh_key_consts.clone(),
                    placements: placements.clone(),
                },
                reqs,
            ));
        }
    }
    out.sort_by_key(|a| canonical_key(pattern, &a.0));
    out.dedup_by(|a, b| a.0 == b.0);
    out
}

fn canonical_key(pattern: &BlockPattern, b: &Binding) -> (Vec<Sym>, Vec<Placement>) {
    let mut v: Vec<Sym> = pattern.node_vars.iter().map(|n| b.image(*n)).collect();
    v.extend(pattern.key_vars.iter().map(|k| b.image(*k)));
    (v, b.placements.clone())
}

/// Every order obtained by inserting `keys` one after another.
pub fn placements_of(order: &KeyOrder, keys: &[Sym]) -> Vec<(Vec<Placement>, KeyOrder)> {
    let mut acc = vec![(Vec::new(), order.clone())];
    for k in keys {
        let mut next = Vec::new();
        for (ps, o) in &acc {
            if o.chain().is_none() {
                continue;
            }
            for p in o.placements() {
                let mut ps2 = ps.clone();
                ps2.push(p);
                next.push((ps2, o.insert(*k, p)));
            }
        }
        acc = next;
    }
    acc
}

fn join(
    pattern: &BlockPattern,
    closure: &Closure,
    order: &KeyOrder,
    fixed: &BTreeMap<Sym, Sym>,
    deferred: &BTreeSet<Sym>,
) -> Vec<(BTreeMap<Sym, Sym>, Vec<Requirement>)> {
    let is_var = |s: Sym| pattern.node_vars.contains(&s) || pattern.key_vars.contains(&s);
    let positives: Vec<&Atom> = pattern
        .literals
        .iter()
        .filter(|l| !l.negated && !l.atom.is_comparison() && !deferred.contains(&l.atom.pred))
        .map(|l| &l.atom)
        .collect();
    let mut out = Vec::new();
    let mut env = fixed.clone();
    let mut used = vec![false; positives.len()];
    search(pattern, closure, order, &positives, &mut used, &mut env, &is_var, deferred, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn search(
    pattern: &BlockPattern,
    closure: &Closure,
    order: &KeyOrder,
    positives: &[&Atom],
    used: &mut Vec<bool>,
    env: &mut BTreeMap<Sym, Sym>,
    is_var: &dyn Fn(Sym) -> bool,
    deferred: &BTreeSet<Sym>,
    out: &mut Vec<(BTreeMap<Sym, Sym>, Vec<Requirement>)>,
) {
    let bound = |t: &Term, env: &BTreeMap<Sym, Sym>| !is_var(t.sym()) || env.contains_key(&t.sym());
    let next = (0..positives.len())
        .filter(|&i| !used[i])
        .max_by_key(|&i| {
            (
                positives[i].args.iter().filter(|t| bound(t, env)).count(),
                std::cmp::Reverse(i),
            )
        });
    let Some(i) = next else {
        if let Some(reqs) = finish(pattern, closure, order, env, deferred) {
            out.push((env.clone(), reqs));
        }
        return;
    };
    used[i] = true;
    let atom = positives[i];
    for t in closure.tuples(atom.pred) {
        if t.len() != atom.args.len() {
            continue;
        }
        let mut newly = Vec::new();
        let mut ok = true;
        for (a, v) in atom.args.iter().zip(t) {
            let s = a.sym();
            if !is_var(s) {
                let want = env.get(&s).copied().unwrap_or(s);
                if want != *v {
                    ok = false;
                    break;
                }
                continue;
            }
            match env.get(&s) {
                Some(b) if b != v => {
                    ok = false;
                    break;
                }
                Some(_) => {}
                None => {
                    // Distinct node variables denote distinct nodes.
                    if pattern.node_vars.contains(&s)
                        && env.iter().any(|(k, x)| x == v && !pattern.key_vars.contains(k))
                    {
                        ok = false;
                        break;
                    }
                    env.insert(s, *v);
                    newly.push(s);
                }
            }
        }
        if ok {
            search(pattern, closure, order, positives, used, env, is_var, deferred, out);
        }
        for s in newly {
            env.remove(&s);
        }
    }
    used[i] = false;
}

/// Checks comparisons and negated literals once everything is bound.
fn finish(
    pattern: &BlockPattern,
    closure: &Closure,
    order: &KeyOrder,
    env: &BTreeMap<Sym, Sym>,
    deferred: &BTreeSet<Sym>,
) -> Option<Vec<Requirement>> {
    let img = |s: Sym| env.get(&s).copied().unwrap_or(s);
    for v in pattern.node_vars.iter().chain(&pattern.key_vars) {
        if !env.contains_key(v) {
            return None;
        }
    }
    let mut reqs = Vec::new();
    for l in &pattern.literals {
        let args: Vec<Sym> = l.atom.args.iter().map(|t| img(t.sym())).collect();
        if l.atom.is_comparison() {
            let holds = if l.atom.pred.as_str() == LT {
                order.lt(args[0], args[1])
            } else {
                order.eq(args[0], args[1])
            };
            if holds == l.negated {
                return None;
            }
            continue;
        }
        let fact = Fact {
            pred: l.atom.pred,
            args,
        };
        if deferred.contains(&l.atom.pred) {
            reqs.push((!l.negated, fact));
        } else if l.negated && closure.contains(&fact) {
            return None;
        }
    }
    Some(reqs)
}

/// First precondition literal that does not hold for `binding`, if any.
pub fn falsified_literal(
    pattern: &BlockPattern,
    binding: &Binding,
    closure: &Closure,
    order: &KeyOrder,
) -> Option<Literal> {
    for l in &pattern.literals {
        let atom = binding.ground(&l.atom);
        let holds = super::eval::atom_holds(&atom, closure, order);
        if holds == l.negated {
            return Some(Literal {
                negated: l.negated,
                atom,
            });
        }
    }
    None
}
