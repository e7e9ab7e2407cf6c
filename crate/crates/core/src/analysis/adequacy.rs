//! Lock adequacy under bounded interference.
//!
//! The interference universe is every binding of every block on the
//! starting heap. Each event fires at most once, only if its own
//! precondition locks are disjoint from the held locks, and only while its
//! precondition still holds. Traces that break an invariant are dropped.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::kernel::matching::falsified_literal;
use crate::kernel::{
    apply_steps_atomic, match_block, Binding, ConstraintCheck, FactSet, FreshNames, KeyOrder, Model,
    StateTrace, Suffixed,
};
use crate::kernel::state::TraceEntry;
use crate::knowledge::GroundStep;
use crate::logic::Fact;
use crate::symbol::Sym;

use super::locks::{guess_locks, precondition_nodes, LockSet};
use super::{binding_order, AnalysisError, InstanceGraph};

/// Default cap on explored interference states.
pub const DEFAULT_BUDGET: usize = 200_000;

/// One ground interfering operation instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterferenceEvent {
    pub operation: Sym,
    pub block: Sym,
    pub binding: Binding,
    pub fresh_nodes: Vec<Sym>,
    pub placements: Vec<String>,
    pub guard: LockSet,
    #[serde(skip)]
    pub order: KeyOrder,
    #[serde(skip)]
    pub fresh_facts: Vec<Fact>,
    #[serde(skip)]
    pub steps: Vec<GroundStep>,
    /// Prime count carried by this event's fresh constants.
    #[serde(skip)]
    primes: usize,
}

impl InterferenceEvent {
    /// `insert(x,target',t)`: the operation applied to its cited nodes.
    pub fn label(&self, model: &Model) -> String {
        let (_, spec) = model
            .find_block(self.operation.as_str(), self.block.as_str())
            .expect("event block exists");
        let pattern = model.pattern(self.operation, self.block);
        let args: Vec<String> = precondition_nodes(spec, pattern)
            .iter()
            .map(|n| self.binding.image(*n).to_string())
            .collect();
        format!("{}({})", self.operation, args.join(","))
    }
}

/// Guard of an interfering event: the locks it would itself take.
pub fn guard_set(model: &Model, op: Sym, block: Sym, binding: &Binding) -> LockSet {
    let (_, spec) = model.find_block(op.as_str(), block.as_str()).expect("block exists");
    guess_locks(spec, model.pattern(op, block), binding)
}

fn primes(n: usize) -> String {
    "'".repeat(n)
}

/// Every operation instance applicable on `(facts, order)`, with fresh
/// constants primed apart from each other: the first event allocating
/// nodes gets one prime, the next two, and so on.
pub fn interference_events(model: &Model, facts: &FactSet, order: &KeyOrder) -> Vec<InterferenceEvent> {
    let mut out = Vec::new();
    let mut allocating = 0;
    for (op, spec) in model.blocks() {
        let pattern = model.pattern(op.name, spec.id);
        for b in match_block(&model.eval, pattern, facts, order, &Suffixed(primes(1))) {
            let n = if pattern.fresh_nodes.is_empty() && pattern.fresh_keys.is_empty() {
                0
            } else {
                allocating += 1;
                allocating
            };
            let b = if n > 1 { reprime(model, op.name, spec.id, &b, 1, n) } else { b };
            let fresh_facts = b.fresh_facts(pattern);
            out.push(InterferenceEvent {
                operation: op.name,
                block: spec.id,
                fresh_nodes: b.fresh_nodes.clone(),
                placements: b.placements.iter().map(|p| format!("{p:?}")).collect(),
                guard: guess_locks(spec, pattern, &b),
                order: binding_order(order, &b),
                fresh_facts,
                steps: spec.steps.iter().map(|s| s.rename(&b.map)).collect(),
                binding: b,
                primes: n,
            });
        }
    }
    out
}

/// Renaming of a binding's fresh constants from `from` primes to `to`.
fn prime_map(model: &Model, op: Sym, block: Sym, from: usize, to: usize) -> BTreeMap<Sym, Sym> {
    let pattern = model.pattern(op, block);
    let (a, b) = (Suffixed(primes(from)), Suffixed(primes(to)));
    let mut m = BTreeMap::new();
    for n in &pattern.fresh_nodes {
        m.insert(a.node(*n), b.node(*n));
    }
    for (k, owner) in &pattern.fresh_keys {
        m.insert(a.key(*k, *owner), b.key(*k, *owner));
    }
    m
}

fn reprime(model: &Model, op: Sym, block: Sym, b: &Binding, from: usize, to: usize) -> Binding {
    let m = prime_map(model, op, block, from, to);
    let r = |s: &Sym| *m.get(s).unwrap_or(s);
    Binding {
        map: b.map.iter().map(|(k, v)| (*k, r(v))).collect(),
        fresh_nodes: b.fresh_nodes.iter().map(r).collect(),
        fresh_keys: b.fresh_keys.iter().map(r).collect(),
        placements: b.placements.clone(),
    }
}

/// The block whose precondition must stay true, under one binding.
#[derive(Debug, Clone, Copy)]
pub struct Protected<'a> {
    pub op: Sym,
    pub block: Sym,
    pub binding: &'a Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Adequate,
    Inadequate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdequacyVerdict {
    pub outcome: Outcome,
    pub locks: LockSet,
    pub horizon: usize,
    pub counterexample: Option<StateTrace>,
    pub falsified_conjunct: Option<String>,
    pub falsified_at: Option<usize>,
    pub events_considered: usize,
    pub events_admitted: usize,
    pub states_explored: usize,
}

impl AdequacyVerdict {
    pub fn is_adequate(&self) -> bool {
        self.outcome == Outcome::Adequate
    }
}

struct Search<'a> {
    model: &'a Model,
    op: Sym,
    block: Sym,
    protected: &'a Binding,
    events: Vec<InterferenceEvent>,
    horizon: usize,
    budget: usize,
    explored: usize,
    seen: HashMap<(FactSet, Vec<bool>), usize>,
    path: Vec<(usize, FactSet)>,
}

struct Found {
    literal: String,
}

impl Search<'_> {
    fn dfs(&mut self, state: &FactSet, order: &KeyOrder, fired: &mut Vec<bool>) -> Result<Option<Found>, AnalysisError> {
        let depth = self.path.len();
        if depth == self.horizon {
            return Ok(None);
        }
        let key = (state.clone(), fired.clone());
        match self.seen.get(&key) {
            Some(&d) if d <= depth => return Ok(None),
            _ => {
                self.seen.insert(key, depth);
            }
        }
        self.explored += 1;
        if self.explored > self.budget {
            return Err(AnalysisError::Budget {
                budget: self.budget,
                horizon: self.horizon,
            });
        }
        for i in 0..self.events.len() {
            if fired[i] {
                continue;
            }
            let ev = &self.events[i];
            let Ok(next_order) = order.union(&ev.order) else {
                continue;
            };
            let mut pre_state = state.clone();
            pre_state.extend(ev.fresh_facts.iter().cloned());
            let pattern = self.model.pattern(ev.operation, ev.block);
            let closure = self.model.closure(&pre_state, &next_order);
            if falsified_literal(pattern, &ev.binding, &closure, &next_order).is_some() {
                continue;
            }
            let next = apply_steps_atomic(&self.model.ops, &pre_state, &ev.steps);
            let closure = self.model.closure(&next, &next_order);
            if let ConstraintCheck::Violated(_) = self.model.eval.check(&closure, &next_order) {
                continue;
            }
            self.path.push((i, next.clone()));
            let pattern = self.model.pattern(self.op, self.block);
            if let Some(l) = falsified_literal(pattern, self.protected, &closure, &next_order) {
                let text = if l.negated { format!("not {}", l.atom) } else { l.atom.to_string() };
                return Ok(Some(Found { literal: text }));
            }
            fired[i] = true;
            let r = self.dfs(&next, &next_order, fired)?;
            fired[i] = false;
            if r.is_some() {
                return Ok(r);
            }
            self.path.pop();
        }
        Ok(None)
    }

    /// The path as a trace, fresh constants renamed by firing order.
    fn trace(&self, start: &FactSet) -> StateTrace {
        let mut rename = BTreeMap::new();
        let mut n = 0;
        for (e, _) in &self.path {
            let ev = &self.events[*e];
            if ev.primes > 0 {
                n += 1;
                rename.extend(prime_map(self.model, ev.operation, ev.block, ev.primes, n));
            }
        }
        let r = |f: &Fact| Fact {
            pred: f.pred,
            args: f.args.iter().map(|a| *rename.get(a).unwrap_or(a)).collect(),
        };
        let mut t = StateTrace {
            horizon: self.horizon,
            ..StateTrace::default()
        };
        t.push_state(&start.iter().map(r).collect());
        for (time, (e, s)) in self.path.iter().enumerate() {
            let ev = &self.events[*e];
            let label = ev.label(self.model);
            let label = rename.iter().fold(label, |acc, (from, to)| {
                if from == to {
                    acc
                } else {
                    replace_word(&acc, from.as_str(), to.as_str())
                }
            });
            t.applied.push(TraceEntry { time, label });
            t.push_state(&s.iter().map(r).collect());
        }
        t
    }
}

fn replace_word(text: &str, from: &str, to: &str) -> String {
    // Labels are comma separated constants inside one pair of parentheses.
    let Some(open) = text.find('(') else {
        return text.to_string();
    };
    let inner = &text[open + 1..text.len() - 1];
    let parts: Vec<&str> = inner.split(',').map(|p| if p == from { to } else { p }).collect();
    format!("{}({})", &text[..open], parts.join(","))
}

/// Decides whether holding `locks` keeps the protected block's
/// precondition true under up to `horizon` interference events.
pub fn check_lock_adequacy(
    model: &Model,
    instance: &InstanceGraph,
    protected: &Protected,
    locks: &LockSet,
    horizon: usize,
    budget: usize,
) -> Result<AdequacyVerdict, AnalysisError> {
    let universe = interference_events(model, &instance.facts, &instance.order);
    check_lock_adequacy_in(model, instance, &universe, protected, locks, Limits { horizon, budget })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub horizon: usize,
    pub budget: usize,
}

/// Like [`check_lock_adequacy`] over a precomputed interference universe,
/// as returned by [`interference_events`] on the instance.
pub fn check_lock_adequacy_in(
    model: &Model,
    instance: &InstanceGraph,
    universe: &[InterferenceEvent],
    protected: &Protected,
    locks: &LockSet,
    limits: Limits,
) -> Result<AdequacyVerdict, AnalysisError> {
    let Limits { horizon, budget } = limits;
    let Protected { op, block, binding } = *protected;
    if model.find_block(op.as_str(), block.as_str()).is_none() {
        return Err(AnalysisError::UnknownBlock {
            operation: op.to_string(),
            block: block.to_string(),
        });
    }
    let mut start = instance.facts.clone();
    start.extend(binding.fresh_facts(model.pattern(op, block)));
    let base = binding_order(&instance.order, binding);
    let considered = universe.len();
    let events: Vec<InterferenceEvent> = universe.iter().filter(|e| e.guard.is_disjoint(locks)).cloned().collect();
    let admitted = events.len();
    let mut search = Search {
        model,
        op,
        block,
        protected: binding,
        events,
        horizon,
        budget,
        explored: 0,
        seen: HashMap::new(),
        path: vec![],
    };
    let mut fired = vec![false; admitted];
    let found = search.dfs(&start, &base, &mut fired)?;
    let mut verdict = AdequacyVerdict {
        outcome: Outcome::Adequate,
        locks: locks.clone(),
        horizon,
        counterexample: None,
        falsified_conjunct: None,
        falsified_at: None,
        events_considered: considered,
        events_admitted: admitted,
        states_explored: search.explored,
    };
    if let Some(f) = found {
        verdict.outcome = Outcome::Inadequate;
        verdict.falsified_at = Some(search.path.len());
        verdict.falsified_conjunct = Some(f.literal);
        verdict.counterexample = Some(search.trace(&start));
    }
    Ok(verdict)
}
