//! Executable semantics: fixpoint evaluation, key orders, destructive
//! steps and precondition matching.

pub mod asp;
pub mod eval;
pub mod keys;
pub mod matching;
pub mod state;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::knowledge::operations::{BlockSpec, OperationSpec, Operations};
use crate::knowledge::Theory;
use crate::symbol::Sym;

pub use eval::{check_constraints, least_fixpoint, Closure, ConstraintCheck, Evaluator};
pub use keys::{CycleError, KeyOrder, Placement};
pub use matching::{match_block, match_block_pinned, Binding, BlockPattern, FreshNames, PatternNames, Suffixed};
pub use state::{apply_effects_atomic, apply_step_sequential, apply_steps_atomic, FactSet, StateTrace};

/// A theory and its operations, compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Model {
    pub theory: Theory,
    pub ops: Operations,
    pub eval: Evaluator,
    patterns: BTreeMap<(Sym, Sym), BlockPattern>,
}

impl Model {
    pub fn new(theory: Theory, ops: Operations) -> Model {
        let eval = Evaluator::new(&theory);
        let mut patterns = BTreeMap::new();
        for op in &ops.operations {
            for b in &op.blocks {
                patterns.insert((op.name, b.id), BlockPattern::new(&theory, &ops, b));
            }
        }
        Model {
            theory,
            ops,
            eval,
            patterns,
        }
    }

    pub fn pattern(&self, op: Sym, block: Sym) -> &BlockPattern {
        &self.patterns[&(op, block)]
    }

    pub fn closure(&self, facts: &FactSet, order: &KeyOrder) -> Arc<Closure> {
        self.eval.closure_of(facts, order)
    }

    pub fn check(&self, facts: &FactSet, order: &KeyOrder) -> ConstraintCheck {
        let c = self.eval.closure_of(facts, order);
        self.eval.check(&c, order)
    }

    /// Every (operation, block) pair in declaration order.
    pub fn blocks(&self) -> impl Iterator<Item = (&OperationSpec, &BlockSpec)> {
        self.ops
            .operations
            .iter()
            .flat_map(|o| o.blocks.iter().map(move |b| (o, b)))
    }

    pub fn find_block(&self, op: &str, block: &str) -> Option<(&OperationSpec, &BlockSpec)> {
        self.blocks()
            .find(|(o, b)| o.name.as_str() == op && b.id.as_str() == block)
    }
}
