//! All analyses over one knowledge set, in order.

use serde::Serialize;

use crate::kernel::{match_block, Model, PatternNames};
use crate::knowledge::GroundStep;
use crate::symbol::Sym;

use super::adequacy::{check_lock_adequacy_in, interference_events, AdequacyVerdict, InterferenceEvent, Limits, Protected, DEFAULT_BUDGET};
use super::keymove::{detect_key_movement, KeyMovement};
use super::locks::{abstract_locks, guess_locks};
use super::order::{check_program_order, OrderCheck};
use super::strategy::{select_strategy, Strategy};
use super::{find_maximal_instance, synthesize_abstract, AnalysisError, Bounds, InstanceGraph, InstanceSearch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Instance bounds; `None` takes [`Bounds::for_model`].
    pub bounds: Option<Bounds>,
    /// Interference horizon; defaults to [`interference_horizon`].
    pub horizon: Option<usize>,
    pub budget: usize,
    pub strategy_override: Option<Strategy>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bounds: None,
            horizon: None,
            budget: DEFAULT_BUDGET,
            strategy_override: None,
        }
    }
}

/// Number of operation-instance bindings applicable on the instance,
/// distinct fresh-key placements counted separately.
pub fn interference_horizon(model: &Model, instance: &InstanceGraph) -> usize {
    model
        .blocks()
        .map(|(op, b)| {
            match_block(&model.eval, model.pattern(op.name, b.id), &instance.facts, &instance.order, &PatternNames).len()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockVerdict {
    pub operation: Sym,
    pub block: Sym,
    pub bindings: usize,
    /// Pattern nodes locked by the abstract code.
    pub locks: Vec<Sym>,
    pub accepted_orders: Vec<Vec<String>>,
    pub order_checks: Vec<OrderCheck>,
    /// The failing binding's verdict if any binding fails, else the first.
    pub adequacy: AdequacyVerdict,
    pub abstract_code: Option<String>,
    #[serde(skip)]
    pub order: Option<Vec<GroundStep>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperationVerdict {
    pub operation: Sym,
    pub adequate: bool,
    pub order_exists: bool,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthesisVerdict {
    pub instance: Vec<String>,
    pub key_order: String,
    pub horizon: usize,
    pub blocks: Vec<BlockVerdict>,
    pub operations: Vec<OperationVerdict>,
    pub key_movement: KeyMovement,
    pub adequate: bool,
    pub order_exists: bool,
    pub selected_strategy: Strategy,
    /// The strategy in force, after any override.
    pub strategy: Strategy,
}

impl SynthesisVerdict {
    pub fn block(&self, op: &str, block: &str) -> Option<&BlockVerdict> {
        self.blocks
            .iter()
            .find(|b| b.operation.as_str() == op && b.block.as_str() == block)
    }
}

fn analyze_block(
    model: &Model,
    instance: &InstanceGraph,
    op: Sym,
    block: Sym,
    universe: &[InterferenceEvent],
    limits: Limits,
) -> Result<BlockVerdict, AnalysisError> {
    let (_, spec) = model.find_block(op.as_str(), block.as_str()).expect("block exists");
    let pattern = model.pattern(op, block);
    let bindings = match_block(&model.eval, pattern, &instance.facts, &instance.order, &PatternNames);
    let orders = check_program_order(model, op, block, instance)?;
    let mut chosen: Option<AdequacyVerdict> = None;
    for b in &bindings {
        let locks = guess_locks(spec, pattern, b);
        let protected = Protected { op, block, binding: b };
        let v = check_lock_adequacy_in(model, instance, universe, &protected, &locks, limits)?;
        let failed = !v.is_adequate();
        if chosen.is_none() || failed {
            chosen = Some(v);
        }
        if failed {
            break;
        }
    }
    let adequacy = chosen.ok_or_else(|| AnalysisError::NoBinding {
        operation: op.to_string(),
        block: block.to_string(),
    })?;
    let locks = abstract_locks(model, spec, pattern);
    let order = orders.accepted.first().cloned();
    let abstract_code = order
        .as_ref()
        .map(|o| synthesize_abstract(spec, &locks, o).to_string());
    Ok(BlockVerdict {
        operation: op,
        block,
        bindings: bindings.len(),
        locks,
        accepted_orders: orders
            .accepted
            .iter()
            .map(|o| o.iter().map(|s| s.to_string()).collect())
            .collect(),
        order_checks: orders.checks,
        adequacy,
        abstract_code,
        order,
    })
}

pub fn analyze(model: &Model, options: &AnalysisOptions) -> Result<(InstanceSearch, SynthesisVerdict), AnalysisError> {
    let search = find_maximal_instance(model, options.bounds.unwrap_or_else(|| Bounds::for_model(model)))?;
    let instance = &search.instance;
    let horizon = options
        .horizon
        .unwrap_or_else(|| interference_horizon(model, instance));
    let universe = interference_events(model, &instance.facts, &instance.order);
    let limits = Limits {
        horizon,
        budget: options.budget,
    };
    let mut blocks = Vec::new();
    for (op, b) in model.blocks() {
        blocks.push(analyze_block(model, instance, op.name, b.id, &universe, limits)?);
    }
    let key_movement = detect_key_movement(model, instance);
    let mut operations = Vec::new();
    for op in &model.ops.operations {
        let mine: Vec<&BlockVerdict> = blocks.iter().filter(|b| b.operation == op.name).collect();
        let adequate = mine.iter().all(|b| b.adequacy.is_adequate());
        let order_exists = mine.iter().all(|b| b.order.is_some());
        operations.push(OperationVerdict {
            operation: op.name,
            adequate,
            order_exists,
            strategy: select_strategy(order_exists, adequate, &key_movement),
        });
    }
    let adequate = blocks.iter().all(|b| b.adequacy.is_adequate());
    let order_exists = blocks.iter().all(|b| b.order.is_some());
    let selected = select_strategy(order_exists, adequate, &key_movement);
    let verdict = SynthesisVerdict {
        instance: instance.describe(),
        key_order: instance.order_text(),
        horizon,
        blocks,
        operations,
        key_movement,
        adequate,
        order_exists,
        selected_strategy: selected,
        strategy: options.strategy_override.unwrap_or(selected),
    };
    Ok((search, verdict))
}
