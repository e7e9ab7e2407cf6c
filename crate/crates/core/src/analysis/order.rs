//! Sequential step-order checking: a permutation of a block's steps is
//! accepted when every intermediate state satisfies the constraints.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::kernel::{
    apply_step_sequential, apply_steps_atomic, match_block, Binding, ConstraintCheck, FactSet, KeyOrder,
    Model, PatternNames,
};
use crate::knowledge::GroundStep;
use crate::symbol::Sym;

use super::{binding_order, binding_state, AnalysisError, InstanceGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderViolation {
    pub time: usize,
    pub constraint: String,
    pub binding: String,
}

/// Verdict on one permutation, or on a rejected prefix of several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderCheck {
    pub steps: Vec<String>,
    pub accepted: bool,
    pub violation: Option<OrderViolation>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderResult {
    /// Accepted pattern-level orders, lexicographic by step index.
    pub accepted: Vec<Vec<GroundStep>>,
    pub checks: Vec<OrderCheck>,
    pub bindings: usize,
}

impl OrderResult {
    pub fn has_order(&self) -> bool {
        !self.accepted.is_empty()
    }
}

struct Ctx<'a> {
    model: &'a Model,
    op: Sym,
    block: Sym,
    runs: Vec<Run>,
}

/// One binding's evolving state.
struct Run {
    binding: Binding,
    order: KeyOrder,
    initial_set: Option<BTreeSet<Vec<Sym>>>,
    final_set: Option<BTreeSet<Vec<Sym>>>,
    stack: Vec<FactSet>,
    /// Verdicts on states already seen; permutations revisit them often.
    seen: HashMap<FactSet, Option<String>>,
}

impl<'a> Ctx<'a> {
    fn new(model: &'a Model, op: Sym, block: Sym, instance: &InstanceGraph) -> Result<Ctx<'a>, AnalysisError> {
        let pattern = model.pattern(op, block);
        let bindings = match_block(&model.eval, pattern, &instance.facts, &instance.order, &PatternNames);
        if bindings.is_empty() {
            return Err(AnalysisError::NoBinding {
                operation: op.to_string(),
                block: block.to_string(),
            });
        }
        let (_, spec) = model.find_block(op.as_str(), block.as_str()).expect("pattern exists");
        let runs = bindings
            .into_iter()
            .map(|b| {
                let start = binding_state(model, op, block, &instance.facts, &b);
                let order = binding_order(&instance.order, &b);
                let steps: Vec<GroundStep> = spec.steps.iter().map(|s| s.rename(&b.map)).collect();
                let end = apply_steps_atomic(&model.ops, &start, &steps);
                let initial_set = abstract_set(model, &start, &order);
                let final_set = abstract_set(model, &end, &order);
                Run {
                    binding: b,
                    order,
                    initial_set,
                    final_set,
                    stack: vec![start],
                    seen: HashMap::new(),
                }
            })
            .collect();
        Ok(Ctx { model, op, block, runs })
    }

    /// Applies `step` to every run; on failure the runs are left unchanged.
    /// A failing run moves to the front so that it is tried first next time.
    fn push(&mut self, step: &GroundStep) -> Result<(), OrderViolation> {
        let time = self.runs[0].stack.len();
        let mut next_states = Vec::with_capacity(self.runs.len());
        for i in 0..self.runs.len() {
            let run = &mut self.runs[i];
            let ground = step.rename(&run.binding.map);
            let next = apply_step_sequential(&self.model.ops, run.stack.last().unwrap(), &ground);
            let verdict = match run.seen.get(&next) {
                Some(v) => v.clone(),
                None => {
                    let v = violation(self.model, run, &next);
                    run.seen.insert(next.clone(), v.clone());
                    v
                }
            };
            if let Some(c) = verdict {
                let binding = run.binding.to_string();
                let failing = self.runs.remove(i);
                self.runs.insert(0, failing);
                return Err(OrderViolation {
                    time,
                    constraint: c,
                    binding,
                });
            }
            next_states.push(next);
        }
        for (run, next) in self.runs.iter_mut().zip(next_states) {
            run.stack.push(next);
        }
        Ok(())
    }

    fn pop(&mut self) {
        for r in &mut self.runs {
            r.stack.pop();
        }
    }

    fn postcondition_warnings(&self) -> Vec<String> {
        let (_, spec) = self
            .model
            .find_block(self.op.as_str(), self.block.as_str())
            .expect("block exists");
        let mut out = Vec::new();
        for run in &self.runs {
            let closure = self.model.closure(run.stack.last().unwrap(), &run.order);
            for l in &spec.postcondition {
                let atom = run.binding.ground(&l.atom);
                if crate::kernel::eval::atom_holds(&atom, &closure, &run.order) == l.negated {
                    let text = if l.negated { format!("not {atom}") } else { atom.to_string() };
                    out.push(format!("postcondition {text} fails for {}", run.binding));
                }
            }
        }
        out
    }
}

fn abstract_set(model: &Model, facts: &FactSet, order: &KeyOrder) -> Option<BTreeSet<Vec<Sym>>> {
    let pred = model.theory.meta.abstract_set?;
    let c = model.closure(facts, order);
    Some(c.tuples(pred).iter().cloned().collect())
}

fn violation(model: &Model, run: &Run, state: &FactSet) -> Option<String> {
    let closure = model.closure(state, &run.order);
    if let ConstraintCheck::Violated(c) = model.eval.check(&closure, &run.order) {
        return Some(c);
    }
    let pred = model.theory.meta.abstract_set?;
    let now: BTreeSet<Vec<Sym>> = closure.tuples(pred).iter().cloned().collect();
    if Some(&now) != run.initial_set.as_ref() && Some(&now) != run.final_set.as_ref() {
        return Some(format!("{pred} is neither its initial nor its final extension"));
    }
    None
}

fn labels(steps: &[&GroundStep]) -> Vec<String> {
    steps.iter().map(|s| s.to_string()).collect()
}

/// Checks one permutation of the block's steps.
pub fn check_step_order(
    model: &Model,
    op: Sym,
    block: Sym,
    instance: &InstanceGraph,
    steps: &[GroundStep],
) -> Result<OrderCheck, AnalysisError> {
    let (_, spec) = model
        .find_block(op.as_str(), block.as_str())
        .ok_or_else(|| AnalysisError::UnknownBlock {
            operation: op.to_string(),
            block: block.to_string(),
        })?;
    let mut want = spec.steps.clone();
    for s in steps {
        match want.iter().position(|w| w == s) {
            Some(i) => {
                want.remove(i);
            }
            None => return Err(AnalysisError::ForeignStep(s.to_string())),
        }
    }
    if let Some(s) = want.first() {
        return Err(AnalysisError::ForeignStep(format!("missing {s}")));
    }
    let mut ctx = Ctx::new(model, op, block, instance)?;
    let refs: Vec<&GroundStep> = steps.iter().collect();
    for s in steps {
        if let Err(v) = ctx.push(s) {
            return Ok(OrderCheck {
                steps: labels(&refs),
                accepted: false,
                violation: Some(v),
                warnings: vec![],
            });
        }
    }
    Ok(OrderCheck {
        steps: labels(&refs),
        accepted: true,
        violation: None,
        warnings: ctx.postcondition_warnings(),
    })
}

/// Every accepted permutation of the block's steps. Rejections are
/// reported once per failing prefix.
pub fn check_program_order(
    model: &Model,
    op: Sym,
    block: Sym,
    instance: &InstanceGraph,
) -> Result<OrderResult, AnalysisError> {
    let (_, spec) = model
        .find_block(op.as_str(), block.as_str())
        .ok_or_else(|| AnalysisError::UnknownBlock {
            operation: op.to_string(),
            block: block.to_string(),
        })?;
    let steps = spec.steps.clone();
    let mut ctx = Ctx::new(model, op, block, instance)?;
    let mut result = OrderResult {
        accepted: vec![],
        checks: vec![],
        bindings: ctx.runs.len(),
    };
    let mut used = vec![false; steps.len()];
    let mut prefix: Vec<usize> = Vec::new();
    search(&mut ctx, &steps, &mut used, &mut prefix, &mut result);
    Ok(result)
}

fn search(ctx: &mut Ctx, steps: &[GroundStep], used: &mut [bool], prefix: &mut Vec<usize>, out: &mut OrderResult) {
    if prefix.len() == steps.len() {
        let chosen: Vec<&GroundStep> = prefix.iter().map(|&i| &steps[i]).collect();
        out.accepted.push(chosen.iter().map(|s| (*s).clone()).collect());
        out.checks.push(OrderCheck {
            steps: labels(&chosen),
            accepted: true,
            violation: None,
            warnings: ctx.postcondition_warnings(),
        });
        return;
    }
    let mut tried: Vec<&GroundStep> = Vec::new();
    for i in 0..steps.len() {
        if used[i] || tried.contains(&&steps[i]) {
            continue;
        }
        tried.push(&steps[i]);
        prefix.push(i);
        match ctx.push(&steps[i]) {
            Ok(()) => {
                used[i] = true;
                search(ctx, steps, used, prefix, out);
                used[i] = false;
                ctx.pop();
            }
            Err(v) => {
                let chosen: Vec<&GroundStep> = prefix.iter().map(|&j| &steps[j]).collect();
                out.checks.push(OrderCheck {
                    steps: labels(&chosen),
                    accepted: false,
                    violation: Some(v),
                    warnings: vec![],
                });
            }
        }
        prefix.pop();
    }
}
