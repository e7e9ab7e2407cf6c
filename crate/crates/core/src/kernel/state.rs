//! Destructive steps over base fact sets with field-granular inertia.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::knowledge::operations::{Effect, GroundStep, Operations};
use crate::logic::Fact;

pub type FactSet = BTreeSet<Fact>;

fn overwritten(f: &Fact, e: &Effect) -> bool {
    f.pred == e.relation && f.args.get(e.position) == Some(&e.node)
}

/// Applies all effects as one transition: every written (node, relation)
/// field loses its old facts, then every caused fact is added.
pub fn apply_effects_atomic(state: &FactSet, effects: &[Effect]) -> FactSet {
    let mut next: FactSet = state
        .iter()
        .filter(|f| !effects.iter().any(|e| overwritten(f, e)))
        .cloned()
        .collect();
    next.extend(effects.iter().map(|e| e.fact.clone()));
    next
}

pub fn apply_steps_atomic(ops: &Operations, state: &FactSet, steps: &[GroundStep]) -> FactSet {
    let effects: Vec<Effect> = steps.iter().map(|s| ops.effect(s)).collect();
    apply_effects_atomic(state, &effects)
}

pub fn apply_step_sequential(ops: &Operations, state: &FactSet, step: &GroundStep) -> FactSet {
    apply_effects_atomic(state, &[ops.effect(step)])
}

/// One labelled transition of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub time: usize,
    pub label: String,
}

/// Time-indexed base-fluent states with the transitions between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct StateTrace {
    pub horizon: usize,
    pub states: Vec<Vec<String>>,
    pub applied: Vec<TraceEntry>,
}

impl StateTrace {
    pub fn push_state(&mut self, s: &FactSet) {
        self.states.push(s.iter().map(|f| f.to_string()).collect());
    }

    pub fn final_state(&self) -> Option<&[String]> {
        self.states.last().map(|v| v.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::parse_operations;

    const OPS: &str = "
operation(op). atomic_step(link). atomic_step(link_left). atomic_step(link_right).
modifies(link(x,y), x). causes(link(x,y), edge(x,y)).
modifies(link_left(x,y), x). causes(link_left(x,y), left(x,y)).
modifies(link_right(x,y), x). causes(link_right(x,y), right(x,y)).
precondition(op, [edge(x, y)]). program_steps(op, [link(x, y)]).
";

    fn set(facts: &[(&str, &str, &str)]) -> FactSet {
        facts.iter().map(|(p, a, b)| Fact::new(p, &[a, b])).collect()
    }

    #[test]
    fn interference_insert_is_one_transition() {
        let ops = parse_operations(OPS).unwrap();
        let s = set(&[("edge", "x", "tau"), ("edge", "tau", "y")]);
        let steps = [GroundStep::new("link", &["tau", "tau'"]), GroundStep::new("link", &["tau'", "y"])];
        let next = apply_steps_atomic(&ops, &s, &steps);
        assert_eq!(next, set(&[("edge", "x", "tau"), ("edge", "tau", "tau'"), ("edge", "tau'", "y")]));
        assert_eq!(apply_steps_atomic(&ops, &s, &[]), s);
    }

    #[test]
    fn link_left_keeps_right_child() {
        let ops = parse_operations(OPS).unwrap();
        let s = set(&[("left", "a", "b"), ("right", "a", "c")]);
        let next = apply_steps_atomic(&ops, &s, &[GroundStep::new("link_left", &["a", "d"])]);
        assert_eq!(next, set(&[("left", "a", "d"), ("right", "a", "c")]));
    }

    #[test]
    fn sequential_assignment() {
        let ops = parse_operations(OPS).unwrap();
        let s = set(&[("edge", "x", "y")]);
        let a = apply_step_sequential(&ops, &s, &GroundStep::new("link", &["x", "target"]));
        assert_eq!(a, set(&[("edge", "x", "target")]));
        let b = apply_step_sequential(&ops, &s, &GroundStep::new("link", &["target", "y"]));
        assert_eq!(b, set(&[("edge", "x", "y"), ("edge", "target", "y")]));
    }
}
