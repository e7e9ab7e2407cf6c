//! One synchronised update block.

use serde::Serialize;

use crate::knowledge::GroundStep;
use crate::symbol::Sym;

use super::infer::{infer_l_value, plan_allocations, plan_lock_order, BlockContext};
use super::CodegenError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedBlock {
    pub operation: String,
    pub block: String,
    pub allocations: Vec<String>,
    pub initializations: Vec<String>,
    pub key_assignments: Vec<String>,
    /// Nodes in lock order, as pattern symbols.
    pub lock_nodes: Vec<String>,
    pub lock_statements: Vec<String>,
    pub validation_guard: String,
    pub update_statements: Vec<String>,
    pub unlock_statements: Vec<String>,
    /// Emitted before the updates; `rcu_synchronize();` under RCU.
    pub pre_update: Vec<String>,
}

impl RenderedBlock {
    /// One statement per line, without indentation. The guard body is
    /// indented by two spaces.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.extend(self.allocations.iter().cloned());
        out.extend(self.initializations.iter().cloned());
        out.extend(self.key_assignments.iter().cloned());
        out.extend(self.lock_statements.iter().cloned());
        out.push(format!("if(!({})){{", self.validation_guard));
        out.extend(self.unlock_statements.iter().map(|s| format!("  {s}")));
        out.push("  continue;".into());
        out.push("}".into());
        out.extend(self.pre_update.iter().cloned());
        out.extend(self.update_statements.iter().cloned());
        out.extend(self.unlock_statements.iter().cloned());
        out
    }
}

fn value_text(cx: &BlockContext, v: Sym) -> Result<String, CodegenError> {
    if cx.model.ops.constants.contains(&v) || cx.pattern.constants.contains(&v) {
        return Ok(if v.as_str() == "nil" { "NULL".into() } else { v.to_string() });
    }
    infer_l_value(cx, v)
}

/// `<lv>-><field> = <value>;` for one step.
pub fn update_statement(cx: &BlockContext, step: &GroundStep) -> Result<String, CodegenError> {
    let ops = &cx.model.ops;
    if ops.kind(step.kind).is_none() {
        return Err(CodegenError::UnknownStep(step.to_string()));
    }
    let effect = ops.effect(step);
    let field = ops
        .field_name(effect.relation)
        .unwrap_or_else(|| effect.relation.to_string());
    let value = effect
        .fact
        .args
        .iter()
        .enumerate()
        .find(|(i, _)| *i != effect.position)
        .map(|(_, a)| *a)
        .ok_or_else(|| CodegenError::UnknownStep(step.to_string()))?;
    Ok(format!("{}->{} = {};", infer_l_value(cx, effect.node)?, field, value_text(cx, value)?))
}

/// Renders the block with its updates in `order`.
pub fn render_block(cx: &BlockContext, order: &[GroundStep]) -> Result<RenderedBlock, CodegenError> {
    let (op, block) = (cx.operation.to_string(), cx.block().to_string());
    if order.is_empty() {
        return Err(CodegenError::EmptyBlock { operation: op, block });
    }
    let guard = cx
        .mappings
        .validation_for(&op, &block)
        .ok_or_else(|| CodegenError::MissingValidation {
            operation: op.clone(),
            block: block.clone(),
        })?
        .to_string();
    let (allocations, initializations, key_assignments) = plan_allocations(cx, order)?;
    let lock_order = plan_lock_order(cx)?;
    let mut lvs: Vec<String> = Vec::new();
    for n in &lock_order {
        let lv = infer_l_value(cx, *n)?;
        if lvs.contains(&lv) {
            return Err(CodegenError::AmbiguousLValue {
                operation: op,
                block,
                lvalue: lv,
            });
        }
        lvs.push(lv);
    }
    let update_statements = order
        .iter()
        .map(|s| update_statement(cx, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RenderedBlock {
        operation: op,
        block,
        allocations,
        initializations,
        key_assignments,
        lock_nodes: lock_order.iter().map(|n| n.to_string()).collect(),
        lock_statements: lvs.iter().map(|lv| format!("{lv}->mtx.lock();")).collect(),
        validation_guard: guard,
        update_statements,
        unlock_statements: lvs.iter().map(|lv| format!("{lv}->mtx.unlock();")).collect(),
        pre_update: Vec::new(),
    })
}
