//! Reasoning over a model: instance selection, lock guessing, step-order
//! checking, lock adequacy, key movement and strategy selection.

pub mod abstract_code;
pub mod adequacy;
pub mod instance;
pub mod keymove;
pub mod locks;
pub mod order;
pub mod pipeline;
pub mod strategy;

use thiserror::Error;

use crate::kernel::{Binding, FactSet, KeyOrder, Model};

pub use abstract_code::{synthesize_abstract, AbstractCode, AbstractStmt};
pub use adequacy::{check_lock_adequacy, check_lock_adequacy_in, guard_set, interference_events, Limits, AdequacyVerdict, InterferenceEvent, Outcome, Protected};
pub use instance::{find_maximal_instance, Bounds, InstanceGraph, InstanceSearch, Rejected};
pub use keymove::{detect_key_movement, KeyMovement};
pub use locks::{guess_locks, LockSet};
pub use order::{check_program_order, check_step_order, OrderCheck, OrderResult};
pub use pipeline::{analyze, interference_horizon, AnalysisOptions, BlockVerdict, SynthesisVerdict};
pub use strategy::{select_strategy, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("no maximally applicable instance with at most {max_nodes} interior nodes")]
    NoInstance { max_nodes: usize, rejected: Vec<Rejected> },
    #[error("no block {operation}::{block}")]
    UnknownBlock { operation: String, block: String },
    #[error("precondition of {operation}::{block} has no binding on the instance")]
    NoBinding { operation: String, block: String },
    #[error("interference search exceeded its budget of {budget} states at horizon {horizon}")]
    Budget { budget: usize, horizon: usize },
    #[error("step {0} does not belong to the block")]
    ForeignStep(String),
}

/// The key order a binding was matched under.
pub fn binding_order(base: &KeyOrder, binding: &Binding) -> KeyOrder {
    let mut order = base.clone();
    for (k, p) in binding.fresh_keys.iter().zip(&binding.placements) {
        order = order.insert(*k, *p);
    }
    order
}

/// Instance facts extended with the `key` facts of a binding's fresh nodes.
pub fn binding_state(model: &Model, op: crate::symbol::Sym, block: crate::symbol::Sym, facts: &FactSet, binding: &Binding) -> FactSet {
    let mut s = facts.clone();
    s.extend(binding.fresh_facts(model.pattern(op, block)));
    s
}
