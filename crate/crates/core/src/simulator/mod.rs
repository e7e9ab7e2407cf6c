//! Interleaved execution of synthesized programs over a shared heap.
//!
//! Threads run abstract programs (locks, one validation, updates, unlocks)
//! against a sequentially consistent heap of facts. A failed validation
//! releases every lock, re-traverses (re-matches the operation with its
//! target pinned) and starts over at lock acquisition.

pub mod explore;
pub mod machine;
pub mod program;
pub mod serial;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{binding_order, binding_state, InstanceGraph};
use crate::kernel::{apply_steps_atomic, match_block, Binding, FactSet, KeyOrder, Model, Suffixed};
use crate::symbol::Sym;

pub use explore::{explore, explore_all, ExploreBounds, ExploreReport, Exploration, Mode, Violation, ViolationKind};
pub use machine::{random_schedule, run_schedule, Schedule, SimResult, ThreadOutcome};
pub use program::{check_lock_symmetry, compile_abstract, Library, SimProgram, SimStmt, SymmetryError};
pub use serial::{check_serializability, SetEffect};

/// Pattern symbol naming the node an operation is about.
pub const TARGET: &str = "target";

pub const DEFAULT_RETRY_LIMIT: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("node {0} is not bound")]
    Unbound(String),
    #[error("no program for {operation}::{block}")]
    UnknownBlock { operation: String, block: String },
    #[error("schedule step {index} (thread {thread}): {reason}")]
    InvalidSchedule { index: usize, thread: usize, reason: String },
    #[error("{threads} threads exceed the bound of {max}")]
    Bounds { threads: usize, max: usize },
}

/// One simulated thread: the operation instance its traversal found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThreadSpec {
    pub operation: Sym,
    pub block: Sym,
    pub binding: Binding,
    /// Appended to the names of nodes this thread allocates.
    pub suffix: String,
    /// Pattern symbols that keep their constant across retries.
    #[serde(skip)]
    pub pinned: BTreeMap<Sym, Sym>,
}

impl ThreadSpec {
    pub fn label(&self) -> String {
        format!("{}::{}{}", self.operation, self.block, self.binding)
    }
}

/// A set of threads and the key order their search keys live in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub threads: Vec<ThreadSpec>,
    pub order: KeyOrder,
}

impl Scenario {
    pub fn labels(&self) -> Vec<String> {
        self.threads.iter().map(|t| t.label()).collect()
    }
}

pub struct Simulator<'a> {
    pub model: &'a Model,
    pub library: Library,
    pub facts: FactSet,
    pub order: KeyOrder,
    pub retry_limit: u32,
}

fn primes(n: usize) -> String {
    "'".repeat(n)
}

/// What a retry keeps: allocated nodes and the target with its key.
/// Blocks without a `target` node keep the whole binding.
pub fn pinned_symbols(model: &Model, op: Sym, block: Sym, b: &Binding) -> BTreeMap<Sym, Sym> {
    let pattern = model.pattern(op, block);
    let t = Sym::new(TARGET);
    let mut pinned = BTreeMap::new();
    for n in &pattern.fresh_nodes {
        pinned.insert(*n, b.image(*n));
    }
    if pattern.node_vars.contains(&t) {
        pinned.insert(t, b.image(t));
    } else if pattern.fresh_nodes.contains(&t) {
        for (k, owner) in &pattern.fresh_keys {
            if *owner == Some(t) {
                pinned.insert(*k, b.image(*k));
            }
        }
    } else {
        for s in pattern.node_vars.iter().chain(pattern.fresh_keys.iter().map(|(k, _)| k)) {
            pinned.insert(*s, b.image(*s));
        }
    }
    pinned
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a Model, library: Library, instance: &InstanceGraph) -> Self {
        Simulator {
            model,
            library,
            facts: instance.facts.clone(),
            order: instance.order.clone(),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    /// Does the instance, run alone and atomically, keep the invariants?
    /// Instances that break them without any interference say nothing
    /// about synchronisation and are left out of scenarios.
    pub fn sequentially_sound(&self, op: Sym, block: Sym, b: &Binding, order: &KeyOrder) -> bool {
        let (_, spec) = self.model.find_block(op.as_str(), block.as_str()).expect("block exists");
        let state = binding_state(self.model, op, block, &self.facts, b);
        let steps: Vec<_> = spec.steps.iter().map(|s| s.rename(&b.map)).collect();
        let after = apply_steps_atomic(&self.model.ops, &state, &steps);
        self.model.check(&after, &binding_order(order, b)).is_satisfied()
    }

    /// Labels of the single-thread instances [`Self::sequentially_sound`]
    /// rejects on the instance.
    pub fn unsound_instances(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (op, spec) in self.model.blocks() {
            let pattern = self.model.pattern(op.name, spec.id);
            for b in match_block(&self.model.eval, pattern, &self.facts, &self.order, &Suffixed(String::new())) {
                if !self.sequentially_sound(op.name, spec.id, &b, &self.order) {
                    out.push(format!("{}::{}{}", op.name, spec.id, b));
                }
            }
        }
        out
    }

    /// Every operation instance thread `index` may start with, given the
    /// search keys already placed in `order`.
    fn thread_options(&self, index: usize, order: &KeyOrder) -> Vec<(ThreadSpec, KeyOrder)> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let suffix = primes(index);
        for (op, spec) in self.model.blocks() {
            let pattern = self.model.pattern(op.name, spec.id);
            for b in match_block(&self.model.eval, pattern, &self.facts, order, &Suffixed(suffix.clone())) {
                if !self.sequentially_sound(op.name, spec.id, &b, order) {
                    continue;
                }
                let pinned = pinned_symbols(self.model, op.name, spec.id, &b);
                let keep: BTreeSet<Sym> = pattern
                    .fresh_keys
                    .iter()
                    .filter_map(|(k, _)| pinned.get(k).copied())
                    .collect();
                let next = binding_order(order, &b).restrict(|k| order.contains(k) || keep.contains(&k));
                let nodes: Vec<Sym> = pattern
                    .node_vars
                    .iter()
                    .chain(&pattern.fresh_nodes)
                    .map(|n| b.image(*n))
                    .collect();
                let chain = format!("{:?}", next.chain());
                if !seen.insert((op.name, spec.id, nodes, chain)) {
                    continue;
                }
                out.push((
                    ThreadSpec {
                        operation: op.name,
                        block: spec.id,
                        binding: b,
                        suffix: suffix.clone(),
                        pinned,
                    },
                    next,
                ));
            }
        }
        out
    }

    /// All ways to start `n` threads on the instance, each thread's
    /// search key placed after those of the threads before it.
    pub fn scenarios(&self, n: usize) -> Vec<Scenario> {
        let mut acc = vec![Scenario {
            threads: Vec::new(),
            order: self.order.clone(),
        }];
        for i in 0..n {
            let mut next = Vec::new();
            for s in &acc {
                for (t, order) in self.thread_options(i, &s.order) {
                    let mut threads = s.threads.clone();
                    threads.push(t);
                    next.push(Scenario { threads, order });
                }
            }
            acc = next;
        }
        acc
    }

    /// A scenario from explicit picks: `(operation, block, binding index)`
    /// per thread, indices into that thread's options for the block.
    pub fn scenario(&self, picks: &[(&str, &str, usize)]) -> Option<Scenario> {
        let mut s = Scenario {
            threads: Vec::new(),
            order: self.order.clone(),
        };
        for (i, (op, block, idx)) in picks.iter().enumerate() {
            let (t, order) = self
                .thread_options(i, &s.order)
                .into_iter()
                .filter(|(t, _)| t.operation.as_str() == *op && t.block.as_str() == *block)
                .nth(*idx)?;
            s.threads.push(t);
            s.order = order;
        }
        Some(s)
    }
}
