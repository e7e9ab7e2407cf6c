//! Sequential operation knowledge: preconditions, destructive steps and
//! postconditions per operation block.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::syntax::{read_clauses, PTerm, Pos, SyntaxError};
use super::KnowledgeError;
use crate::logic::{Atom, Literal, Term, EQ, LT};
use crate::symbol::Sym;

/// Argument of a caused fact: either a step parameter or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepArg {
    Param(usize),
    Const(Sym),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepKind {
    pub name: Sym,
    pub params: Vec<Sym>,
    pub caused_relation: Sym,
    pub caused_args: Vec<StepArg>,
    /// Index into `params` of the node whose field is overwritten.
    pub modified_param: usize,
    /// Index into the caused fact's arguments holding the modified node.
    pub modified_argument_position: usize,
}

/// The write performed by one ground step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Effect {
    pub fact: crate::logic::Fact,
    pub node: Sym,
    pub relation: Sym,
    pub position: usize,
}

impl StepKind {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn effect(&self, args: &[Sym]) -> Effect {
        let fact_args = self
            .caused_args
            .iter()
            .map(|a| match a {
                StepArg::Param(i) => args[*i],
                StepArg::Const(c) => *c,
            })
            .collect();
        Effect {
            fact: crate::logic::Fact {
                pred: self.caused_relation,
                args: fact_args,
            },
            node: args[self.modified_param],
            relation: self.caused_relation,
            position: self.modified_argument_position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GroundStep {
    pub kind: Sym,
    pub args: Vec<Sym>,
}

impl GroundStep {
    pub fn new(kind: &str, args: &[&str]) -> Self {
        GroundStep {
            kind: Sym::new(kind),
            args: args.iter().map(|a| Sym::new(a)).collect(),
        }
    }

    pub fn rename(&self, map: &BTreeMap<Sym, Sym>) -> GroundStep {
        GroundStep {
            kind: self.kind,
            args: self.args.iter().map(|a| *map.get(a).unwrap_or(a)).collect(),
        }
    }
}

impl fmt::Display for GroundStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub id: Sym,
    pub precondition: Vec<Literal>,
    pub steps: Vec<GroundStep>,
    pub postcondition: Vec<Literal>,
}

impl BlockSpec {
    /// Every symbol occurring in the precondition, in first-mention order.
    pub fn mentioned_symbols(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        for l in &self.precondition {
            for t in &l.atom.args {
                let s = t.sym();
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationSpec {
    pub name: Sym,
    pub blocks: Vec<BlockSpec>,
}

impl OperationSpec {
    pub fn block(&self, id: Sym) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Operations {
    pub operations: Vec<OperationSpec>,
    pub step_kinds: BTreeMap<Sym, StepKind>,
    /// Value constants (colors, tags, nil) that are never pattern nodes.
    pub constants: BTreeSet<Sym>,
    /// Pointer relations and the C++ field each one is stored in.
    pub fields: Vec<(Sym, String)>,
    pub warnings: Vec<String>,
}

impl Operations {
    pub fn operation(&self, name: Sym) -> Option<&OperationSpec> {
        self.operations.iter().find(|o| o.name == name)
    }

    pub fn kind(&self, name: Sym) -> Option<&StepKind> {
        self.step_kinds.get(&name)
    }

    pub fn effect(&self, step: &GroundStep) -> Effect {
        self.step_kinds[&step.kind].effect(&step.args)
    }

    /// Pointer fields: explicit `field/2` entries, or the usual
    /// edge/left/right relations written by some step kind.
    pub fn pointer_fields(&self) -> Vec<(Sym, String)> {
        if !self.fields.is_empty() {
            return self.fields.clone();
        }
        let caused: BTreeSet<Sym> = self.step_kinds.values().map(|k| k.caused_relation).collect();
        [("left", "left"), ("right", "right"), ("edge", "next")]
            .into_iter()
            .filter(|(r, _)| caused.contains(&Sym::new(r)))
            .map(|(r, f)| (Sym::new(r), f.to_string()))
            .collect()
    }

    pub fn field_name(&self, relation: Sym) -> Option<String> {
        self.pointer_fields()
            .into_iter()
            .find(|(r, _)| *r == relation)
            .map(|(_, f)| f)
    }

    /// Step arguments that name heap nodes rather than values.
    pub fn step_nodes(&self, step: &GroundStep) -> Vec<Sym> {
        step.args
            .iter()
            .copied()
            .filter(|a| !self.constants.contains(a))
            .collect()
    }
}

#[derive(Default)]
struct Draft {
    pre: Option<Vec<Literal>>,
    steps: Option<Vec<GroundStep>>,
    post: Option<Vec<Literal>>,
}

fn ident(t: &PTerm, pos: Pos, what: &str) -> Result<Sym, SyntaxError> {
    match t {
        PTerm::Ident(s) => Ok(Sym::new(s)),
        other => Err(SyntaxError::new(pos, format!("expected {what}, found {other}"))),
    }
}

fn literal_list(t: &PTerm, pos: Pos) -> Result<Vec<Literal>, SyntaxError> {
    let PTerm::List(items) = t else {
        return Err(SyntaxError::new(pos, format!("expected a list, found {t}")));
    };
    items.iter().map(|i| Literal::from_pterm(i, pos)).collect()
}

fn step_list(t: &PTerm, pos: Pos) -> Result<Vec<GroundStep>, SyntaxError> {
    let PTerm::List(items) = t else {
        return Err(SyntaxError::new(pos, format!("expected a list, found {t}")));
    };
    items
        .iter()
        .map(|i| {
            let atom = Atom::from_pterm(i, pos)?;
            let mut args = Vec::new();
            for a in atom.args {
                match a {
                    Term::Const(c) => args.push(c),
                    Term::Var(v) => {
                        return Err(SyntaxError::new(
                            pos,
                            format!("program steps must be ground, found variable {v}"),
                        ))
                    }
                }
            }
            Ok(GroundStep {
                kind: atom.pred,
                args,
            })
        })
        .collect()
}

/// Splits `(op, [block,] list)` and `(ds, op, block, list)` argument forms.
fn op_block_list(args: &[PTerm], pos: Pos) -> Result<(Sym, Option<Sym>, &PTerm), SyntaxError> {
    match args {
        [op, list] => Ok((ident(op, pos, "operation name")?, None, list)),
        [op, block, list] => Ok((
            ident(op, pos, "operation name")?,
            Some(ident(block, pos, "block id")?),
            list,
        )),
        [_ds, op, block, list] => Ok((
            ident(op, pos, "operation name")?,
            Some(ident(block, pos, "block id")?),
            list,
        )),
        _ => Err(SyntaxError::new(pos, "expected (operation, [block,] list)")),
    }
}

pub fn parse_operations(text: &str) -> Result<Operations, KnowledgeError> {
    let clauses = read_clauses(text)?;
    let mut ops = Operations::default();
    let mut op_order: Vec<Sym> = Vec::new();
    let mut drafts: BTreeMap<Sym, Vec<(Option<Sym>, Draft)>> = BTreeMap::new();
    let mut atomic: Vec<Sym> = Vec::new();
    let mut modifies: BTreeMap<Sym, (Vec<Sym>, Sym)> = BTreeMap::new();
    let mut causes: BTreeMap<Sym, (Vec<Sym>, Atom)> = BTreeMap::new();

    for clause in clauses {
        let pos = clause.pos;
        let Some(head) = clause.head else {
            return Err(SyntaxError::new(pos, "operation knowledge contains only facts").into());
        };
        if !clause.body.is_empty() {
            return Err(SyntaxError::new(pos, "operation knowledge contains only facts").into());
        }
        let name = head.name().unwrap_or("").to_string();
        let args = head.args();
        match (name.as_str(), args.len()) {
            ("operation", 1) => {
                let op = ident(&args[0], pos, "operation name")?;
                if !op_order.contains(&op) {
                    op_order.push(op);
                }
            }
            ("atomic_step", 1) => atomic.push(ident(&args[0], pos, "step name")?),
            ("constant", 1) => {
                ops.constants.insert(ident(&args[0], pos, "constant")?);
            }
            ("constants", 1) => {
                let PTerm::List(items) = &args[0] else {
                    return Err(SyntaxError::new(pos, "constants/1 expects a list").into());
                };
                for i in items {
                    ops.constants.insert(ident(i, pos, "constant")?);
                }
            }
            ("field", 2) => {
                let rel = ident(&args[0], pos, "relation")?;
                let field = ident(&args[1], pos, "field name")?;
                ops.fields.push((rel, field.to_string()));
            }
            ("modifies", 2) => {
                let step = Atom::from_pterm(&args[0], pos)?;
                let node = ident(&args[1], pos, "modified parameter")?;
                let params = step.args.iter().map(|t| t.sym()).collect();
                modifies.insert(step.pred, (params, node));
            }
            ("causes", 2) => {
                let step = Atom::from_pterm(&args[0], pos)?;
                let effect = Atom::from_pterm(&args[1], pos)?;
                let params = step.args.iter().map(|t| t.sym()).collect();
                causes.insert(step.pred, (params, effect));
            }
            ("precondition" | "pre" | "program_steps" | "postcondition", 2..=4) => {
                let (op, block, list) = op_block_list(args, pos)?;
                let entries = drafts.entry(op).or_default();
                let idx = match entries.iter().position(|(b, _)| *b == block) {
                    Some(i) => i,
                    None => {
                        entries.push((block, Draft::default()));
                        entries.len() - 1
                    }
                };
                let draft = &mut entries[idx].1;
                let label = block.map(|b| b.to_string()).unwrap_or_default();
                let dup = |what: &str| {
                    KnowledgeError::Operations(format!("duplicate {what} for {op}::{label}"))
                };
                match name.as_str() {
                    "program_steps" => {
                        if draft.steps.replace(step_list(list, pos)?).is_some() {
                            return Err(dup("program_steps"));
                        }
                    }
                    "postcondition" => {
                        if draft.post.replace(literal_list(list, pos)?).is_some() {
                            return Err(dup("postcondition"));
                        }
                    }
                    _ => {
                        if draft.pre.replace(literal_list(list, pos)?).is_some() {
                            return Err(dup("precondition"));
                        }
                    }
                }
            }
            _ => {
                return Err(SyntaxError::new(pos, format!("unknown operation fact {name}/{}", args.len())).into())
            }
        }
    }

    for step in &atomic {
        let Some((params, node)) = modifies.get(step) else {
            return Err(KnowledgeError::Operations(format!("atomic step {step} lacks modifies/2")));
        };
        let Some((cparams, effect)) = causes.get(step) else {
            return Err(KnowledgeError::Operations(format!("atomic step {step} lacks causes/2")));
        };
        if cparams != params {
            return Err(KnowledgeError::Operations(format!(
                "modifies/2 and causes/2 disagree on the parameters of {step}"
            )));
        }
        let modified_param = params.iter().position(|p| p == node).ok_or_else(|| {
            KnowledgeError::Operations(format!("{step} modifies {node}, which is not a parameter"))
        })?;
        let caused_args: Vec<StepArg> = effect
            .args
            .iter()
            .map(|t| match params.iter().position(|p| *p == t.sym()) {
                Some(i) => StepArg::Param(i),
                None => StepArg::Const(t.sym()),
            })
            .collect();
        let modified_argument_position = caused_args
            .iter()
            .position(|a| *a == StepArg::Param(modified_param))
            .ok_or_else(|| {
                KnowledgeError::Operations(format!(
                    "caused fact of {step} does not mention the modified node"
                ))
            })?;
        ops.step_kinds.insert(
            *step,
            StepKind {
                name: *step,
                params: params.clone(),
                caused_relation: effect.pred,
                caused_args,
                modified_param,
                modified_argument_position,
            },
        );
    }

    for op in drafts.keys() {
        if !op_order.contains(op) {
            return Err(KnowledgeError::Operations(format!(
                "knowledge given for undeclared operation {op}"
            )));
        }
    }

    let mut aliases: BTreeMap<Sym, Sym> = BTreeMap::new();
    for op in op_order {
        let mut entries = drafts.remove(&op).unwrap_or_default();
        // Unnamed entries belong to the single named block, if there is one.
        if let Some(di) = entries.iter().position(|(b, _)| b.is_none()) {
            let named: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].0.is_some()).collect();
            if named.len() == 1 {
                let (_, d) = entries.remove(di);
                let ni = if named[0] > di { named[0] - 1 } else { named[0] };
                let target = &mut entries[ni].1;
                for (slot, value, what) in [
                    (&mut target.pre, d.pre, "precondition"),
                    (&mut target.post, d.post, "postcondition"),
                ] {
                    if let Some(v) = value {
                        if slot.replace(v).is_some() {
                            return Err(KnowledgeError::Operations(format!(
                                "duplicate {what} for {op}"
                            )));
                        }
                    }
                }
                if let Some(s) = d.steps {
                    if target.steps.replace(s).is_some() {
                        return Err(KnowledgeError::Operations(format!(
                            "duplicate program_steps for {op}"
                        )));
                    }
                }
            } else if named.is_empty() {
                entries[di].0 = Some(Sym::new("block1"));
            } else {
                return Err(KnowledgeError::Operations(format!(
                    "{op} mixes unnamed entries with several named blocks"
                )));
            }
        }
        let mut blocks = Vec::new();
        for (id, draft) in entries {
            let id = id.expect("unnamed entries resolved above");
            let Some(mut precondition) = draft.pre else {
                return Err(KnowledgeError::Operations(format!("{op}::{id} has no precondition")));
            };
            add_implicit_keys(&mut precondition);
            let mut steps = draft.steps.unwrap_or_default();
            for s in &mut steps {
                if ops.step_kinds.contains_key(&s.kind) {
                    continue;
                }
                let alias = alias_for(s.kind, &ops.step_kinds);
                match alias {
                    Some(a) => {
                        if aliases.insert(s.kind, a).is_none() {
                            ops.warnings.push(format!(
                                "step {} is not declared; treating it as {}",
                                s.kind, a
                            ));
                        }
                        s.kind = a;
                    }
                    None => {
                        return Err(KnowledgeError::UnknownStepKind {
                            name: s.kind.to_string(),
                        })
                    }
                }
            }
            let block = BlockSpec {
                id,
                precondition,
                steps,
                postcondition: draft.post.unwrap_or_default(),
            };
            check_step_nodes(&ops, op, &block)?;
            blocks.push(block);
        }
        ops.operations.push(OperationSpec { name: op, blocks });
    }
    Ok(ops)
}

/// `set_tag` and `tag_node` name the same step; accept either when only
/// the other is declared.
fn alias_for(kind: Sym, kinds: &BTreeMap<Sym, StepKind>) -> Option<Sym> {
    let pairs = [("set_tag", "tag_node"), ("tag_node", "set_tag")];
    pairs
        .iter()
        .find(|(from, to)| kind.as_str() == *from && kinds.contains_key(&Sym::new(to)))
        .map(|(_, to)| Sym::new(to))
}

/// A key symbol `k<node>` compared with lt/eq but never bound by a
/// `key/2` literal is bound to `<node>` when that node is mentioned.
fn add_implicit_keys(pre: &mut Vec<Literal>) {
    let key = Sym::new("key");
    let bound: BTreeSet<Sym> = pre
        .iter()
        .filter(|l| l.atom.pred == key && l.atom.args.len() == 2)
        .map(|l| l.atom.args[1].sym())
        .collect();
    let nodes: BTreeSet<Sym> = pre
        .iter()
        .filter(|l| !l.atom.is_comparison() && l.atom.pred != key)
        .flat_map(|l| l.atom.args.iter().map(|t| t.sym()))
        .collect();
    let mut extra = Vec::new();
    for l in pre.iter() {
        let p = l.atom.pred.as_str();
        if !(p == LT || p == EQ) || l.atom.args.len() != 2 {
            continue;
        }
        for t in &l.atom.args {
            let k = t.sym();
            let Some(node) = k.as_str().strip_prefix('k') else { continue };
            let node = Sym::new(node);
            if !bound.contains(&k) && nodes.contains(&node) {
                let lit = Literal::pos(Atom {
                    pred: key,
                    args: vec![Term::Const(node), Term::Const(k)],
                });
                if !extra.contains(&lit) {
                    extra.push(lit);
                }
            }
        }
    }
    pre.extend(extra);
}

fn check_step_nodes(ops: &Operations, op: Sym, block: &BlockSpec) -> Result<(), KnowledgeError> {
    let mentioned: BTreeSet<Sym> = block.mentioned_symbols().into_iter().collect();
    for step in &block.steps {
        let kind = &ops.step_kinds[&step.kind];
        if kind.arity() != step.args.len() {
            return Err(KnowledgeError::Operations(format!(
                "step {step} in {op}::{} has {} arguments, {} expects {}",
                block.id,
                step.args.len(),
                kind.name,
                kind.arity()
            )));
        }
        for node in ops.step_nodes(step) {
            if !mentioned.contains(&node) {
                return Err(KnowledgeError::StepNodeNotInPrecondition {
                    operation: op.to_string(),
                    block: block.id.to_string(),
                    step: step.to_string(),
                    node: node.to_string(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub const LIST_OPERATIONS: &str = "
operation(insert).        operation(delete).
atomic_step(link).
modifies(link(x,y), x).
causes(link(x,y), edge(x,y)).

precondition(insert,  [reach(x),edge(x,y),not(reach(target)), lt(kx, ktarget), lt(ktarget, ky)]).
program_steps(insert, case1, [link(x, target), link(target, y)]).
postcondition(insert,  [reach(target)]).

precondition(delete, [reach(x), edge(x, target), edge(target, y)]).
program_steps(delete,  [link(x, y)]).
postcondition(delete,  [not(reach(target))]).
";

    #[test]
    fn list_operations() {
        let ops = parse_operations(LIST_OPERATIONS).unwrap();
        assert_eq!(ops.operations.len(), 2);
        let insert = &ops.operations[0];
        assert_eq!(insert.name, Sym::new("insert"));
        assert_eq!(insert.blocks.len(), 1);
        assert_eq!(insert.blocks[0].id, Sym::new("case1"));
        assert_eq!(
            insert.blocks[0].steps,
            vec![GroundStep::new("link", &["x", "target"]), GroundStep::new("link", &["target", "y"])]
        );
        let delete = &ops.operations[1];
        assert_eq!(delete.blocks[0].id, Sym::new("block1"));
        assert_eq!(delete.blocks[0].steps, vec![GroundStep::new("link", &["x", "y"])]);
        let link = ops.kind(Sym::new("link")).unwrap();
        assert_eq!(link.caused_relation, Sym::new("edge"));
        assert_eq!(link.modified_argument_position, 0);
    }

    #[test]
    fn implicit_key_literals_are_added() {
        let ops = parse_operations(LIST_OPERATIONS).unwrap();
        let pre = &ops.operations[0].blocks[0].precondition;
        let shown: Vec<String> = pre.iter().map(|l| l.to_string()).collect();
        assert!(shown.contains(&"key(x,kx)".to_string()));
        assert!(shown.contains(&"key(target,ktarget)".to_string()));
        assert!(shown.contains(&"key(y,ky)".to_string()));
    }

    #[test]
    fn step_on_unmentioned_node_is_rejected() {
        let text = "operation(op). atomic_step(link). modifies(link(x,y), x).
            causes(link(x,y), edge(x,y)).
            precondition(op, [edge(x, y)]). program_steps(op, [link(x, z)]).";
        match parse_operations(text).unwrap_err() {
            KnowledgeError::StepNodeNotInPrecondition { node, .. } => assert_eq!(node, "z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_step_kind() {
        let text = "operation(op). precondition(op, [edge(x, y)]). program_steps(op, [swap(x, y)]).";
        assert!(matches!(
            parse_operations(text).unwrap_err(),
            KnowledgeError::UnknownStepKind { .. }
        ));
    }

    #[test]
    fn set_tag_aliases_tag_node() {
        let text = "operation(op). atomic_step(tag_node). modifies(tag_node(x,t), x).
            causes(tag_node(x,t), tag(x,t)). constant(none).
            precondition(op, [tag(x, none)]). program_steps(op, [set_tag(x, none)]).";
        let ops = parse_operations(text).unwrap();
        assert_eq!(ops.operations[0].blocks[0].steps[0].kind, Sym::new("tag_node"));
        assert_eq!(ops.warnings.len(), 1);
    }

    #[test]
    fn field_granular_effect() {
        let text = "operation(op). atomic_step(link_left).
            modifies(link_left(x,y), x). causes(link_left(x,y), left(x,y)).
            precondition(op, [left(a, b)]). program_steps(op, [link_left(a, b)]).";
        let ops = parse_operations(text).unwrap();
        let e = ops.effect(&GroundStep::new("link_left", &["a", "d"]));
        assert_eq!(e.fact.to_string(), "left(a,d)");
        assert_eq!(e.node, Sym::new("a"));
        assert_eq!(e.relation, Sym::new("left"));
        assert_eq!(ops.pointer_fields(), vec![(Sym::new("left"), "left".to_string())]);
    }
}
