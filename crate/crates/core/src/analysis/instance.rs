//! Search for the smallest instance on which every operation block is
//! applicable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::kernel::matching::{match_block_deferred, Requirement};
use crate::kernel::{match_block, ConstraintCheck, FactSet, KeyOrder, Model, PatternNames};
use crate::knowledge::{KeyScheme, ShapeFamily};
use crate::logic::Fact;
use crate::symbol::Sym;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bounds {
    /// Largest instance considered, counting interior nodes: everything
    /// but the sentinels of a chain, or everything but the root of a tree.
    pub max_nodes: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_nodes: 8 }
    }
}

impl Bounds {
    /// The theory's own `max_nodes` hint, else the default.
    pub fn for_model(model: &Model) -> Bounds {
        match model.theory.meta.max_nodes {
            Some(max_nodes) => Bounds { max_nodes },
            None => Bounds::default(),
        }
    }
}

/// A concrete heap: structural facts, keys, attributes and a key order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceGraph {
    pub nodes: Vec<Sym>,
    pub facts: FactSet,
    pub order: KeyOrder,
}

impl InstanceGraph {
    /// Facts followed by the key chain, e.g. `kh < kx < kt`.
    pub fn describe(&self) -> Vec<String> {
        self.facts.iter().map(|f| f.to_string()).collect()
    }

    pub fn order_text(&self) -> String {
        match self.order.chain() {
            Some(chain) => chain
                .iter()
                .map(|c| {
                    let names: Vec<&str> = c.iter().map(|k| k.as_str()).collect();
                    names.join(" = ")
                })
                .collect::<Vec<_>>()
                .join(" < "),
            None => String::new(),
        }
    }

    pub fn structural_facts(&self) -> Vec<&Fact> {
        let rels = [Sym::new("edge"), Sym::new("left"), Sym::new("right")];
        self.facts.iter().filter(|f| rels.contains(&f.pred)).collect()
    }
}

impl fmt::Display for InstanceGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.structural_facts().iter().map(|x| x.to_string()).collect();
        write!(f, "{{{}}}", s.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejected {
    pub instance: Vec<String>,
    pub inapplicable: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Applicability {
    pub block: String,
    pub bindings: usize,
}

#[derive(Debug, Clone)]
pub struct InstanceSearch {
    pub instance: InstanceGraph,
    pub applicability: Vec<Applicability>,
    pub rejected: Vec<Rejected>,
}

const CHAIN_NAMES: [&str; 6] = ["x", "y", "z", "w", "v", "u"];
const MAX_REJECTED: usize = 64;

fn chain_instance(root: Sym, tail: Sym, interior: usize) -> InstanceGraph {
    let mut nodes = vec![root];
    for i in 0..interior {
        let name = CHAIN_NAMES
            .get(i)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("n{}", i + 1));
        nodes.push(Sym::new(&name));
    }
    nodes.push(tail);
    let mut facts = FactSet::new();
    for w in nodes.windows(2) {
        facts.insert(Fact {
            pred: Sym::new("edge"),
            args: vec![w[0], w[1]],
        });
    }
    let mut chain = Vec::new();
    for n in &nodes {
        let k = key_name(*n);
        facts.insert(Fact {
            pred: Sym::new("key"),
            args: vec![*n, k],
        });
        chain.push(vec![k]);
    }
    InstanceGraph {
        nodes,
        facts,
        order: KeyOrder::from_chain(&chain),
    }
}

pub fn key_name(node: Sym) -> Sym {
    Sym::new(&format!("k{node}"))
}

/// A binary tree shape; children are optional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub left: Option<Box<Shape>>,
    pub right: Option<Box<Shape>>,
}

/// Shapes with `n` nodes, left subtree size ascending. With `full`, every
/// node has zero or two children.
pub fn shapes(n: usize, full: bool) -> Vec<Shape> {
    let mut memo: BTreeMap<usize, Vec<Option<Shape>>> = BTreeMap::new();
    shapes_opt(n, full, &mut memo).into_iter().flatten().collect()
}

fn shapes_opt(n: usize, full: bool, memo: &mut BTreeMap<usize, Vec<Option<Shape>>>) -> Vec<Option<Shape>> {
    if n == 0 {
        return vec![None];
    }
    if let Some(v) = memo.get(&n) {
        return v.clone();
    }
    let mut out = Vec::new();
    for l in 0..n {
        let r = n - 1 - l;
        if full && ((l == 0) != (r == 0)) {
            continue;
        }
        let ls = shapes_opt(l, full, memo);
        let rs = shapes_opt(r, full, memo);
        for a in &ls {
            for b in &rs {
                out.push(Some(Shape {
                    left: a.clone().map(Box::new),
                    right: b.clone().map(Box::new),
                }));
            }
        }
    }
    memo.insert(n, out.clone());
    out
}

/// Builds a tree named by path from the root (`l`, `r`, `lr`, ...). Keys
/// strictly increase in in-order under both key schemes; routing trees
/// differ only in being full.
fn tree_instance(root: Sym, shape: &Shape) -> InstanceGraph {
    fn walk(name: &str, s: &Shape, root: Sym, facts: &mut FactSet, inorder: &mut Vec<Sym>, nodes: &mut Vec<Sym>) -> Sym {
        let me = if name.is_empty() { root } else { Sym::new(name) };
        nodes.push(me);
        let child = |suffix: &str| format!("{name}{suffix}");
        if let Some(l) = &s.left {
            let c = walk(&child("l"), l, root, facts, inorder, nodes);
            facts.insert(Fact {
                pred: Sym::new("left"),
                args: vec![me, c],
            });
        }
        inorder.push(me);
        if let Some(r) = &s.right {
            let c = walk(&child("r"), r, root, facts, inorder, nodes);
            facts.insert(Fact {
                pred: Sym::new("right"),
                args: vec![me, c],
            });
        }
        me
    }
    let mut nodes = Vec::new();
    let mut facts = FactSet::new();
    let mut inorder = Vec::new();
    walk("", shape, root, &mut facts, &mut inorder, &mut nodes);
    for n in &nodes {
        facts.insert(Fact {
            pred: Sym::new("key"),
            args: vec![*n, key_name(*n)],
        });
    }
    let chain: Vec<Vec<Sym>> = inorder.iter().map(|n| vec![key_name(*n)]).collect();
    InstanceGraph {
        nodes,
        facts,
        order: KeyOrder::from_chain(&chain),
    }
}

/// Candidate instances in canonical order: by node count, then shape.
fn candidates(model: &Model, bounds: Bounds) -> Vec<InstanceGraph> {
    let meta = &model.theory.meta;
    let root = meta.root.unwrap_or_else(|| Sym::new("h"));
    match meta.shape.unwrap_or(ShapeFamily::Chain) {
        ShapeFamily::Chain => {
            let tail = meta.tail.unwrap_or_else(|| Sym::new("t"));
            (0..=bounds.max_nodes)
                .map(|n| chain_instance(root, tail, n))
                .collect()
        }
        ShapeFamily::BinaryTree => {
            let full = meta.key_scheme == KeyScheme::Routing;
            let mut out = Vec::new();
            for n in 1..=bounds.max_nodes + 1 {
                for s in shapes(n, full) {
                    out.push(tree_instance(root, &s));
                }
            }
            out
        }
    }
}

/// Tries to make every block applicable on `inst`, assigning node
/// attributes where the theory declares them. Returns the completed
/// instance or the blocks that cannot apply.
/// The completed instance, plus per-block binding counts when nothing was
/// deferred (the instance is then unchanged and the counts are final).
type Completed = (InstanceGraph, Option<Vec<usize>>);

fn complete(model: &Model, inst: &InstanceGraph) -> Result<Completed, (Vec<String>, String)> {
    let attrs: BTreeSet<Sym> = model.theory.meta.attributes.iter().map(|(a, _)| *a).collect();
    let mut options: Vec<Vec<Vec<Requirement>>> = Vec::new();
    let mut counts = Vec::new();
    let mut inapplicable = Vec::new();
    for (op, block) in model.blocks() {
        let pattern = model.pattern(op.name, block.id);
        let found = match_block_deferred(&model.eval, pattern, &inst.facts, &inst.order, &PatternNames, &attrs);
        counts.push(found.len());
        let mut reqs: Vec<Vec<Requirement>> = found.into_iter().map(|(_, r)| r).collect();
        reqs.sort();
        reqs.dedup();
        if reqs.is_empty() {
            inapplicable.push(format!("{}::{}", op.name, block.id));
        }
        options.push(reqs);
    }
    if !inapplicable.is_empty() {
        return Err((inapplicable, "no precondition binding".into()));
    }
    if attrs.is_empty() {
        return match model.check(&inst.facts, &inst.order) {
            ConstraintCheck::Satisfied => Ok((inst.clone(), Some(counts))),
            ConstraintCheck::Violated(v) => Err((vec![], format!("violates {v}"))),
        };
    }
    let mut chosen = BTreeMap::new();
    let mut forbidden = BTreeSet::new();
    if let Some(g) = choose(model, inst, &options, 0, &mut chosen, &mut forbidden) {
        return Ok((g, None));
    }
    Err((vec![], "no attribute assignment satisfies the invariants and every block".into()))
}

type Assignment = BTreeMap<(Sym, Sym), Sym>;

fn choose(
    model: &Model,
    inst: &InstanceGraph,
    options: &[Vec<Vec<Requirement>>],
    at: usize,
    chosen: &mut Assignment,
    forbidden: &mut BTreeSet<(Sym, Sym, Sym)>,
) -> Option<InstanceGraph> {
    if at == options.len() {
        return fill(model, inst, chosen, forbidden);
    }
    'opt: for reqs in &options[at] {
        let mut added_pos = Vec::new();
        let mut added_neg = Vec::new();
        for (positive, f) in reqs {
            let (node, attr, value) = (f.args[0], f.pred, f.args[1]);
            if !inst.nodes.contains(&node) {
                for k in added_pos.drain(..) {
                    chosen.remove(&k);
                }
                for k in added_neg.drain(..) {
                    forbidden.remove(&k);
                }
                continue 'opt;
            }
            let clash = if *positive {
                chosen.get(&(node, attr)).is_some_and(|v| *v != value)
                    || forbidden.contains(&(node, attr, value))
            } else {
                chosen.get(&(node, attr)) == Some(&value)
            };
            if clash {
                for k in added_pos.drain(..) {
                    chosen.remove(&k);
                }
                for k in added_neg.drain(..) {
                    forbidden.remove(&k);
                }
                continue 'opt;
            }
            if *positive {
                if chosen.insert((node, attr), value).is_none() {
                    added_pos.push((node, attr));
                }
            } else if forbidden.insert((node, attr, value)) {
                added_neg.push((node, attr, value));
            }
        }
        if let Some(g) = choose(model, inst, options, at + 1, chosen, forbidden) {
            return Some(g);
        }
        for k in added_pos {
            chosen.remove(&k);
        }
        for k in added_neg {
            forbidden.remove(&k);
        }
    }
    None
}

/// Assigns the remaining attribute values and verifies the result.
fn fill(
    model: &Model,
    inst: &InstanceGraph,
    chosen: &Assignment,
    forbidden: &BTreeSet<(Sym, Sym, Sym)>,
) -> Option<InstanceGraph> {
    let mut free: Vec<(Sym, Sym, Vec<Sym>)> = Vec::new();
    for n in &inst.nodes {
        for (attr, dom) in &model.theory.meta.attributes {
            if !chosen.contains_key(&(*n, *attr)) {
                let allowed: Vec<Sym> = dom
                    .iter()
                    .copied()
                    .filter(|v| !forbidden.contains(&(*n, *attr, *v)))
                    .collect();
                free.push((*n, *attr, allowed));
            }
        }
    }
    let mut assign = chosen.clone();
    fill_rec(model, inst, &free, 0, &mut assign)
}

fn fill_rec(
    model: &Model,
    inst: &InstanceGraph,
    free: &[(Sym, Sym, Vec<Sym>)],
    at: usize,
    assign: &mut Assignment,
) -> Option<InstanceGraph> {
    if at == free.len() {
        let mut g = inst.clone();
        for ((n, a), v) in assign.iter() {
            g.facts.insert(Fact {
                pred: *a,
                args: vec![*n, *v],
            });
        }
        if !model.check(&g.facts, &g.order).is_satisfied() {
            return None;
        }
        for (op, block) in model.blocks() {
            let p = model.pattern(op.name, block.id);
            if match_block(&model.eval, p, &g.facts, &g.order, &PatternNames).is_empty() {
                return None;
            }
        }
        return Some(g);
    }
    let (n, a, dom) = &free[at];
    for v in dom {
        assign.insert((*n, *a), *v);
        if let Some(g) = fill_rec(model, inst, free, at + 1, assign) {
            return Some(g);
        }
    }
    assign.remove(&(*n, *a));
    None
}

pub fn find_maximal_instance(model: &Model, bounds: Bounds) -> Result<InstanceSearch, AnalysisError> {
    let mut rejected = Vec::new();
    for cand in candidates(model, bounds) {
        match complete(model, &cand) {
            Ok((instance, counts)) => {
                let applicability = model
                    .blocks()
                    .enumerate()
                    .map(|(i, (op, block))| Applicability {
                        block: format!("{}::{}", op.name, block.id),
                        bindings: counts.as_ref().map_or_else(
                            || {
                                let pattern = model.pattern(op.name, block.id);
                                match_block(&model.eval, pattern, &instance.facts, &instance.order, &PatternNames).len()
                            },
                            |c| c[i],
                        ),
                    })
                    .collect();
                return Ok(InstanceSearch {
                    instance,
                    applicability,
                    rejected,
                });
            }
            Err((inapplicable, reason)) => {
                if rejected.len() < MAX_REJECTED {
                    rejected.push(Rejected {
                        instance: cand.structural_facts().iter().map(|f| f.to_string()).collect(),
                        inapplicable,
                        reason,
                    });
                }
            }
        }
    }
    Err(AnalysisError::NoInstance {
        max_nodes: bounds.max_nodes,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_counts() {
        assert_eq!(shapes(3, false).len(), 5);
        assert_eq!(shapes(4, false).len(), 14);
        assert_eq!(shapes(3, true).len(), 1);
        assert_eq!(shapes(7, true).len(), 5);
        assert!(shapes(4, true).is_empty());
    }

    #[test]
    fn tree_keys_follow_inorder() {
        let s = &shapes(3, true)[0];
        let g = tree_instance(Sym::new("h"), s);
        assert_eq!(g.to_string(), "{left(h,l), right(h,r)}");
        assert_eq!(g.order_text(), "kl < kh < kr");
    }

    #[test]
    fn chain_naming() {
        let g = chain_instance(Sym::new("h"), Sym::new("t"), 1);
        assert_eq!(g.to_string(), "{edge(h,x), edge(x,t)}");
        assert_eq!(g.order_text(), "kh < kx < kt");
    }
}
