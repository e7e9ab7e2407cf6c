//! Deterministic single-schedule execution.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::analysis::binding_order;
use crate::kernel::matching::falsified_literal;
use crate::kernel::{apply_step_sequential, apply_steps_atomic, match_block_pinned, Binding, ConstraintCheck, FactSet, KeyOrder, Suffixed};
use crate::knowledge::GroundStep;
use crate::symbol::Sym;

use super::explore::ViolationKind;
use super::program::{compile_abstract, SimStmt};
use super::serial::{check_serializability, SetEffect};
use super::{Scenario, SimError, Simulator, ThreadSpec};

/// `(thread, statement index)` pairs in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub steps: Vec<(usize, usize)>,
}

impl Schedule {
    /// One row per step, each thread in its own column.
    pub fn diagram(&self, labels: &[Vec<String>]) -> String {
        const WIDTH: usize = 28;
        let mut out = String::new();
        for (time, (t, pc)) in self.steps.iter().enumerate() {
            let text = labels
                .get(*t)
                .and_then(|l| l.get(*pc))
                .cloned()
                .unwrap_or_else(|| format!("#{pc}"));
            let _ = writeln!(out, "{time:>3} {}T{t}: {text}", " ".repeat(WIDTH * t));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ThreadOutcome {
    Committed { retries: u32 },
    /// No binding of the operation was left to retry with.
    Aborted { retries: u32 },
    Livelock { retries: u32 },
    Blocked { retries: u32 },
    Running { retries: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Phase {
    Acquiring,
    /// Validated; the precondition must stay true until the first update.
    Protected,
    Updating,
    Releasing,
    Committed,
    Aborted,
    Livelock,
}

impl Phase {
    fn done(self) -> bool {
        matches!(self, Phase::Committed | Phase::Aborted | Phase::Livelock)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct ThreadState {
    block: Sym,
    binding: Binding,
    program: Vec<SimStmt>,
    pc: usize,
    held: Vec<Sym>,
    retries: u32,
    phase: Phase,
    effect: Option<SetEffect>,
}

impl ThreadState {
    fn outcome(&self, blocked: bool) -> ThreadOutcome {
        let retries = self.retries;
        match self.phase {
            Phase::Committed => ThreadOutcome::Committed { retries },
            Phase::Aborted => ThreadOutcome::Aborted { retries },
            Phase::Livelock => ThreadOutcome::Livelock { retries },
            _ if blocked => ThreadOutcome::Blocked { retries },
            _ => ThreadOutcome::Running { retries },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct State {
    pub heap: FactSet,
    pub order: KeyOrder,
    pub threads: Vec<ThreadState>,
}

#[derive(Default)]
struct Caches {
    validate: HashMap<(usize, Sym, Binding, FactSet, KeyOrder), Option<Binding>>,
    rematch: HashMap<(usize, FactSet, KeyOrder), Option<(Sym, Binding)>>,
    falsified: HashMap<(Sym, Binding, FactSet, KeyOrder), Option<String>>,
    check: HashMap<(FactSet, KeyOrder), Option<String>>,
    present: HashMap<(FactSet, KeyOrder), BTreeSet<Sym>>,
}

/// Transition system of one scenario.
pub(crate) struct Machine<'s, 'a> {
    sim: &'s Simulator<'a>,
    pub scenario: &'s Scenario,
    caches: RefCell<Caches>,
}

impl<'s, 'a> Machine<'s, 'a> {
    pub fn new(sim: &'s Simulator<'a>, scenario: &'s Scenario) -> Self {
        Machine {
            sim,
            scenario,
            caches: RefCell::new(Caches::default()),
        }
    }

    fn spec(&self, tid: usize) -> &ThreadSpec {
        &self.scenario.threads[tid]
    }

    fn program(&self, tid: usize, block: Sym, binding: &Binding) -> Result<Vec<SimStmt>, SimError> {
        let op = self.spec(tid).operation;
        let code = self.sim.library.get(op, block).ok_or_else(|| SimError::UnknownBlock {
            operation: op.to_string(),
            block: block.to_string(),
        })?;
        Ok(compile_abstract(self.sim.model, code, op, block, binding)?.statements)
    }

    pub fn initial(&self) -> Result<State, SimError> {
        let mut threads = Vec::new();
        for (tid, t) in self.scenario.threads.iter().enumerate() {
            threads.push(ThreadState {
                block: t.block,
                binding: t.binding.clone(),
                program: self.program(tid, t.block, &t.binding)?,
                pc: 0,
                held: Vec::new(),
                retries: 0,
                phase: Phase::Acquiring,
                effect: None,
            });
        }
        let mut s = State {
            heap: self.sim.facts.clone(),
            order: self.scenario.order.clone(),
            threads,
        };
        for tid in 0..s.threads.len() {
            self.settle(&mut s, tid);
        }
        Ok(s)
    }

    /// Program labels per thread, for diagrams.
    pub fn labels(&self, s: &State) -> Vec<Vec<String>> {
        s.threads
            .iter()
            .map(|t| t.program.iter().map(|x| x.to_string()).collect())
            .collect()
    }

    pub fn statement_count(&self, s: &State) -> usize {
        s.threads.iter().map(|t| t.program.len()).sum()
    }

    pub fn enabled(&self, s: &State, tid: usize) -> bool {
        let t = &s.threads[tid];
        if t.phase.done() {
            return false;
        }
        match &t.program[t.pc] {
            SimStmt::Lock(n) => !s.threads.iter().any(|u| u.held.contains(n)),
            _ => true,
        }
    }

    pub fn enabled_threads(&self, s: &State) -> Vec<usize> {
        (0..s.threads.len()).filter(|t| self.enabled(s, *t)).collect()
    }

    pub fn all_done(&self, s: &State) -> bool {
        s.threads.iter().all(|t| t.phase.done())
    }

    pub fn pc(&self, s: &State, tid: usize) -> usize {
        s.threads[tid].pc
    }

    fn pattern(&self, tid: usize, block: Sym) -> &crate::kernel::BlockPattern {
        self.sim.model.pattern(self.spec(tid).operation, block)
    }

    fn present(&self, heap: &FactSet, order: &KeyOrder) -> BTreeSet<Sym> {
        let Some(pred) = self.sim.model.theory.meta.abstract_set else {
            return BTreeSet::new();
        };
        let key = (heap.clone(), order.clone());
        if let Some(p) = self.caches.borrow().present.get(&key) {
            return p.clone();
        }
        let c = self.sim.model.closure(heap, order);
        let p: BTreeSet<Sym> = c.tuples(pred).iter().filter_map(|t| t.first().copied()).collect();
        self.caches.borrow_mut().present.insert(key, p.clone());
        p
    }

    fn violated_invariant(&self, heap: &FactSet, order: &KeyOrder) -> Option<String> {
        let key = (heap.clone(), order.clone());
        if let Some(v) = self.caches.borrow().check.get(&key) {
            return v.clone();
        }
        let v = match self.sim.model.check(heap, order) {
            ConstraintCheck::Satisfied => None,
            ConstraintCheck::Violated(c) => Some(c),
        };
        self.caches.borrow_mut().check.insert(key, v.clone());
        v
    }

    fn falsified(&self, tid: usize, t: &ThreadState, heap: &FactSet, order: &KeyOrder) -> Option<String> {
        let key = (t.block, t.binding.clone(), heap.clone(), order.clone());
        if let Some(v) = self.caches.borrow().falsified.get(&key) {
            return v.clone();
        }
        let c = self.sim.model.closure(heap, order);
        let v = falsified_literal(self.pattern(tid, t.block), &t.binding, &c, order)
            .map(|l| if l.negated { format!("not {}", l.atom) } else { l.atom.to_string() });
        self.caches.borrow_mut().falsified.insert(key, v.clone());
        v
    }

    /// The current binding re-matched on the live heap, or `None`.
    fn validate(&self, tid: usize, t: &ThreadState, heap: &FactSet, order: &KeyOrder) -> Option<Binding> {
        let key = (tid, t.block, t.binding.clone(), heap.clone(), order.clone());
        if let Some(v) = self.caches.borrow().validate.get(&key) {
            return v.clone();
        }
        let spec = self.spec(tid);
        let pattern = self.pattern(tid, t.block);
        let mut pinned = spec.pinned.clone();
        for n in &pattern.node_vars {
            pinned.insert(*n, t.binding.image(*n));
        }
        let v = match_block_pinned(
            &self.sim.model.eval,
            pattern,
            heap,
            order,
            &Suffixed(spec.suffix.clone()),
            &pinned,
        )
        .into_iter()
        .next();
        self.caches.borrow_mut().validate.insert(key, v.clone());
        v
    }

    /// Re-traversal: the first binding of any block of the operation that
    /// agrees with the thread's pinned symbols.
    fn rematch(&self, tid: usize, heap: &FactSet, order: &KeyOrder) -> Option<(Sym, Binding)> {
        let key = (tid, heap.clone(), order.clone());
        if let Some(v) = self.caches.borrow().rematch.get(&key) {
            return v.clone();
        }
        let spec = self.spec(tid);
        let model = self.sim.model;
        let op = model.ops.operations.iter().find(|o| o.name == spec.operation)?;
        let mut found = None;
        for b in &op.blocks {
            let pattern = model.pattern(op.name, b.id);
            if let Some(m) = match_block_pinned(
                &model.eval,
                pattern,
                heap,
                order,
                &Suffixed(spec.suffix.clone()),
                &spec.pinned,
            )
            .into_iter()
            .next()
            {
                found = Some((b.id, m));
                break;
            }
        }
        self.caches.borrow_mut().rematch.insert(key, found.clone());
        found
    }

    fn updates(program: &[SimStmt]) -> Vec<GroundStep> {
        program
            .iter()
            .filter_map(|s| match s {
                SimStmt::Update(g) => Some(g.clone()),
                _ => None,
            })
            .collect()
    }

    /// Marks a thread that ran off the end of its program as committed.
    fn settle(&self, s: &mut State, tid: usize) {
        let t = &mut s.threads[tid];
        if !t.phase.done() && t.pc >= t.program.len() {
            t.phase = Phase::Committed;
        }
    }

    /// Executes the next statement of `tid`, which must be enabled.
    pub fn step(&self, s: &State, tid: usize) -> (State, Vec<ViolationKind>) {
        let mut n = s.clone();
        let mut found = Vec::new();
        let stmt = n.threads[tid].program[n.threads[tid].pc].clone();
        let mut wrote = false;
        let mut committed = false;
        match stmt {
            SimStmt::Lock(x) => {
                let t = &mut n.threads[tid];
                t.held.push(x);
                t.pc += 1;
            }
            SimStmt::Unlock(x) => {
                let t = &mut n.threads[tid];
                t.held.retain(|h| *h != x);
                t.pc += 1;
            }
            SimStmt::Update(g) => {
                n.heap = apply_step_sequential(&self.sim.model.ops, &n.heap, &g);
                let t = &mut n.threads[tid];
                let last = t.program.iter().rposition(|s| matches!(s, SimStmt::Update(_)));
                committed = last == Some(t.pc);
                t.phase = if committed { Phase::Releasing } else { Phase::Updating };
                t.pc += 1;
                wrote = true;
            }
            SimStmt::Validate => self.run_validate(&mut n, tid),
        }
        self.settle(&mut n, tid);
        if wrote {
            for u in 0..n.threads.len() {
                if u == tid || n.threads[u].phase != Phase::Protected {
                    continue;
                }
                if let Some(literal) = self.falsified(u, &n.threads[u], &n.heap, &n.order) {
                    let t = &n.threads[u];
                    found.push(ViolationKind::PreconditionFalsified {
                        thread: u,
                        operation: self.spec(u).operation.to_string(),
                        block: t.block.to_string(),
                        binding: t.binding.to_string(),
                        literal,
                    });
                }
            }
        }
        if committed && !n.threads.iter().any(|t| t.phase == Phase::Updating) {
            if let Some(c) = self.violated_invariant(&n.heap, &n.order) {
                found.push(ViolationKind::Invariant { constraint: c });
            }
        }
        (n, found)
    }

    fn run_validate(&self, n: &mut State, tid: usize) {
        let model = self.sim.model;
        let op = self.spec(tid).operation;
        if let Some(b) = self.validate(tid, &n.threads[tid], &n.heap, &n.order) {
            let block = n.threads[tid].block;
            let mut heap = n.heap.clone();
            heap.extend(b.fresh_facts(model.pattern(op, block)));
            let order = binding_order(&n.order, &b);
            let program = self.program(tid, block, &b).unwrap_or_else(|_| n.threads[tid].program.clone());
            let after = apply_steps_atomic(&model.ops, &heap, &Self::updates(&program));
            let (before_set, after_set) = (self.present(&heap, &order), self.present(&after, &order));
            let effect = SetEffect {
                added: after_set.difference(&before_set).copied().collect(),
                removed: before_set.difference(&after_set).copied().collect(),
            };
            n.heap = heap;
            n.order = order;
            let t = &mut n.threads[tid];
            t.binding = b;
            t.program = program;
            t.effect = Some(effect);
            t.pc += 1;
            t.phase = Phase::Protected;
            if !t.program[t.pc..].iter().any(|s| matches!(s, SimStmt::Update(_))) {
                t.phase = Phase::Releasing;
            }
            return;
        }
        let retries = n.threads[tid].retries + 1;
        let next = if retries > self.sim.retry_limit {
            None
        } else {
            Some(self.rematch(tid, &n.heap, &n.order))
        };
        let program = match &next {
            Some(Some((block, b))) => self.program(tid, *block, b).ok(),
            _ => None,
        };
        let t = &mut n.threads[tid];
        t.held.clear();
        t.retries = retries;
        t.effect = None;
        match (next, program) {
            (None, _) => t.phase = Phase::Livelock,
            (Some(Some((block, b))), Some(p)) => {
                t.block = block;
                t.binding = b;
                t.program = p;
                t.pc = 0;
                t.phase = Phase::Acquiring;
            }
            _ => t.phase = Phase::Aborted,
        }
    }

    /// Violations visible once no thread can move.
    pub fn terminal(&self, s: &State) -> Vec<ViolationKind> {
        let mut out = Vec::new();
        if !self.all_done(s) {
            out.push(ViolationKind::Deadlock {
                blocked: (0..s.threads.len()).filter(|t| !s.threads[*t].phase.done()).collect(),
            });
            return out;
        }
        for (tid, t) in s.threads.iter().enumerate() {
            if t.phase == Phase::Livelock {
                out.push(ViolationKind::Livelock {
                    thread: tid,
                    retries: t.retries,
                });
            }
        }
        if let Some(c) = self.violated_invariant(&s.heap, &s.order) {
            out.push(ViolationKind::Invariant { constraint: c });
        }
        let (initial, final_set, committed) = self.serial_inputs(s);
        if !check_serializability(&initial, &final_set, &committed) {
            out.push(ViolationKind::NonSerializable {
                initial: initial.iter().map(|k| k.to_string()).collect(),
                final_set: final_set.iter().map(|k| k.to_string()).collect(),
                committed: committed.clone(),
            });
        }
        out
    }

    fn serial_inputs(&self, s: &State) -> (BTreeSet<Sym>, BTreeSet<Sym>, Vec<SetEffect>) {
        let initial = self.present(&self.sim.facts, &self.scenario.order);
        let final_set = self.present(&s.heap, &s.order);
        let committed = s
            .threads
            .iter()
            .filter(|t| t.phase == Phase::Committed)
            .filter_map(|t| t.effect.clone())
            .collect();
        (initial, final_set, committed)
    }

    pub fn result(&self, s: &State, violations: Vec<(ViolationKind, usize)>) -> SimResult {
        let blocked = !self.all_done(s) && self.enabled_threads(s).is_empty();
        let (initial, final_set, committed) = self.serial_inputs(s);
        SimResult {
            final_heap: s.heap.iter().map(|f| f.to_string()).collect(),
            outcomes: s.threads.iter().map(|t| t.outcome(blocked)).collect(),
            violations,
            initial_set: initial,
            final_set,
            committed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimResult {
    pub final_heap: Vec<String>,
    pub outcomes: Vec<ThreadOutcome>,
    /// Each violation with the number of steps executed when it appeared.
    pub violations: Vec<(ViolationKind, usize)>,
    pub initial_set: BTreeSet<Sym>,
    pub final_set: BTreeSet<Sym>,
    pub committed: Vec<SetEffect>,
}

impl SimResult {
    pub fn serializable(&self) -> bool {
        check_serializability(&self.initial_set, &self.final_set, &self.committed)
    }
}

/// Replays `schedule` step by step. The statement index of every step
/// must be the thread's current one, and the thread must be able to move.
pub fn run_schedule(sim: &Simulator, scenario: &Scenario, schedule: &Schedule) -> Result<SimResult, SimError> {
    let m = Machine::new(sim, scenario);
    let mut s = m.initial()?;
    let mut violations = Vec::new();
    for (index, &(thread, pc)) in schedule.steps.iter().enumerate() {
        let bad = |reason: String| SimError::InvalidSchedule { index, thread, reason };
        if thread >= s.threads.len() {
            return Err(bad("no such thread".into()));
        }
        if !m.enabled(&s, thread) {
            return Err(bad("thread cannot move".into()));
        }
        if m.pc(&s, thread) != pc {
            return Err(bad(format!("expected statement {}, found {pc}", m.pc(&s, thread))));
        }
        let (next, found) = m.step(&s, thread);
        violations.extend(found.into_iter().map(|v| (v, index + 1)));
        s = next;
    }
    if m.enabled_threads(&s).is_empty() {
        let t = schedule.steps.len();
        violations.extend(m.terminal(&s).into_iter().map(|v| (v, t)));
    }
    Ok(m.result(&s, violations))
}

/// A complete schedule drawn at random: each step picks one of the
/// threads able to move. Stops when none can or after `max_steps`.
pub fn random_schedule(sim: &Simulator, scenario: &Scenario, seed: u64, max_steps: usize) -> Result<Schedule, SimError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = Machine::new(sim, scenario);
    let mut s = m.initial()?;
    let mut steps = Vec::new();
    while steps.len() < max_steps {
        let Some(&t) = m.enabled_threads(&s).choose(&mut rng) else {
            break;
        };
        steps.push((t, m.pc(&s, t)));
        s = m.step(&s, t).0;
    }
    Ok(Schedule { steps })
}
