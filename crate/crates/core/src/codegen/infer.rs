//! L-values and r-values of precondition nodes, and the plans derived
//! from them: allocation and lock order.

use crate::kernel::{BlockPattern, Model};
use crate::knowledge::{BlockSpec, GroundStep, MappingTable};
use crate::logic::{Literal, EQ};
use crate::symbol::Sym;

use super::CodegenError;
use crate::analysis::locks::lock_order;

/// The block being rendered, with everything inference looks at.
pub struct BlockContext<'a> {
    pub model: &'a Model,
    pub mappings: &'a MappingTable,
    pub operation: Sym,
    pub spec: &'a BlockSpec,
    pub pattern: &'a BlockPattern,
}

impl<'a> BlockContext<'a> {
    pub fn new(model: &'a Model, mappings: &'a MappingTable, op: &str, block: &str) -> Result<Self, CodegenError> {
        let (o, spec) = model.find_block(op, block).ok_or_else(|| CodegenError::UnknownBlock {
            operation: op.to_string(),
            block: block.to_string(),
        })?;
        Ok(BlockContext {
            model,
            mappings,
            operation: o.name,
            spec,
            pattern: model.pattern(o.name, spec.id),
        })
    }

    pub fn block(&self) -> Sym {
        self.spec.id
    }

    fn positive(&self) -> impl Iterator<Item = &Literal> {
        self.spec.precondition.iter().filter(|l| !l.negated)
    }

    pub fn is_fresh(&self, node: Sym) -> bool {
        self.pattern.fresh_nodes.contains(&node)
    }

    /// Pointer relations with their C++ field names.
    fn pointer_fields(&self) -> Vec<(Sym, String)> {
        self.model.ops.pointer_fields()
    }

    /// `(predecessor, field)` pairs: `rel(pred, node)` in the precondition.
    fn predecessors(&self, node: Sym) -> Vec<(Sym, String)> {
        let fields = self.pointer_fields();
        self.positive()
            .filter(|l| l.atom.args.len() == 2 && l.atom.args[1].sym() == node)
            .filter_map(|l| {
                let f = fields.iter().find(|(r, _)| *r == l.atom.pred)?;
                Some((l.atom.args[0].sym(), f.1.clone()))
            })
            .collect()
    }

    fn key_of(&self, node: Sym) -> Option<Sym> {
        self.positive()
            .find(|l| l.atom.pred.as_str() == "key" && l.atom.args.len() == 2 && l.atom.args[0].sym() == node)
            .map(|l| l.atom.args[1].sym())
    }

    fn owner_of_key(&self, key: Sym) -> Option<Sym> {
        self.positive()
            .find(|l| l.atom.pred.as_str() == "key" && l.atom.args.len() == 2 && l.atom.args[1].sym() == key)
            .map(|l| l.atom.args[0].sym())
    }
}

/// Expression naming `node` in the generated code.
pub fn infer_l_value(cx: &BlockContext, node: Sym) -> Result<String, CodegenError> {
    l_value(cx, node, &mut Vec::new())
}

fn l_value(cx: &BlockContext, node: Sym, seen: &mut Vec<Sym>) -> Result<String, CodegenError> {
    let (op, block) = (cx.operation.as_str(), cx.block());
    if let Some(v) = cx.mappings.variable_for(op, block.as_str(), node.as_str()) {
        return Ok(v.to_string());
    }
    if !seen.contains(&node) {
        seen.push(node);
        for (pred, field) in cx.predecessors(node) {
            if let Ok(lv) = l_value(cx, pred, seen) {
                seen.pop();
                return Ok(format!("{lv}->{field}"));
            }
        }
        seen.pop();
    }
    if cx.is_fresh(node) {
        return Ok(node.to_string());
    }
    Err(CodegenError::NoLValue {
        operation: op.to_string(),
        block: block.to_string(),
        node: node.to_string(),
    })
}

/// Initial value of `field` on a node the block allocates.
pub fn infer_r_value(cx: &BlockContext, node: Sym, field: &str) -> Result<String, CodegenError> {
    r_value(cx, node, field, &mut Vec::new())
}

fn r_value(cx: &BlockContext, node: Sym, field: &str, seen: &mut Vec<Sym>) -> Result<String, CodegenError> {
    let (op, block) = (cx.operation.as_str(), cx.block().as_str());
    if let Some(e) = cx.mappings.rvalue_for(op, block, &format!("{node}->{field}")) {
        return Ok(e.to_string());
    }
    let missing = || CodegenError::NoRValue {
        operation: op.to_string(),
        block: block.to_string(),
        node: node.to_string(),
        field: field.to_string(),
    };
    if field != "key" {
        return Err(missing());
    }
    let k = cx.key_of(node).ok_or_else(missing)?;
    seen.push(node);
    for l in cx.positive().filter(|l| l.atom.pred.as_str() == EQ && l.atom.args.len() == 2) {
        let (a, b) = (l.atom.args[0].sym(), l.atom.args[1].sym());
        let other_key = if a == k {
            b
        } else if b == k {
            a
        } else {
            continue;
        };
        let Some(other) = cx.owner_of_key(other_key) else {
            continue;
        };
        if seen.contains(&other) {
            continue;
        }
        if cx.is_fresh(other) {
            if let Ok(v) = r_value(cx, other, field, seen) {
                return Ok(v);
            }
            continue;
        }
        if let Ok(lv) = infer_l_value(cx, other) {
            return Ok(format!("{lv}->{field}"));
        }
    }
    Err(missing())
}

/// Fresh nodes in allocation order: first mention in `steps`, then any
/// left over in precondition order.
pub fn allocation_order(cx: &BlockContext, steps: &[GroundStep]) -> Vec<Sym> {
    let mut out = Vec::new();
    for s in steps {
        for a in &s.args {
            if cx.is_fresh(*a) && !out.contains(a) {
                out.push(*a);
            }
        }
    }
    for n in &cx.pattern.fresh_nodes {
        if !out.contains(n) {
            out.push(*n);
        }
    }
    out
}

/// Allocation, pointer initialisation and key assignment statements.
pub fn plan_allocations(
    cx: &BlockContext,
    steps: &[GroundStep],
) -> Result<(Vec<String>, Vec<String>, Vec<String>), CodegenError> {
    let fresh = allocation_order(cx, steps);
    let fields: Vec<String> = cx.pointer_fields().into_iter().map(|(_, f)| f).collect();
    let mut alloc = Vec::new();
    let mut init = Vec::new();
    let mut keys = Vec::new();
    for n in &fresh {
        alloc.push(format!("struct node * {n} = (struct node *) malloc(sizeof(struct node));"));
        for f in &fields {
            init.push(format!("{n}->{f} = NULL;"));
        }
        if cx.key_of(*n).is_some() {
            keys.push(format!("{n}->key = {};", infer_r_value(cx, *n, "key")?));
        }
    }
    Ok((alloc, init, keys))
}

/// Precondition nodes ordered for locking: predecessor-free nodes by
/// first mention, then breadth-first successors.
pub fn plan_lock_order(cx: &BlockContext) -> Result<Vec<Sym>, CodegenError> {
    lock_order(cx.model, cx.spec, cx.pattern).ok_or_else(|| CodegenError::CyclicStructure {
        operation: cx.operation.to_string(),
        block: cx.block().to_string(),
    })
}
