//! Precondition locking: every node a block's precondition cites.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::kernel::{Binding, BlockPattern, Model};
use crate::knowledge::BlockSpec;
use crate::symbol::Sym;

/// Node constants locked by one thread, in acquisition order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct LockSet {
    pub nodes: Vec<Sym>,
}

impl LockSet {
    pub fn new(nodes: impl IntoIterator<Item = Sym>) -> LockSet {
        let mut out = Vec::new();
        for n in nodes {
            if !out.contains(&n) {
                out.push(n);
            }
        }
        LockSet { nodes: out }
    }

    pub fn contains(&self, n: Sym) -> bool {
        self.nodes.contains(&n)
    }

    pub fn is_disjoint(&self, other: &LockSet) -> bool {
        !self.nodes.iter().any(|n| other.contains(*n))
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

impl fmt::Display for LockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<&str> = self.nodes.iter().map(|n| n.as_str()).collect();
        write!(f, "{{{}}}", s.join(", "))
    }
}

/// Pattern node symbols of the precondition, fresh ones included, in
/// first-mention order.
pub fn precondition_nodes(block: &BlockSpec, pattern: &BlockPattern) -> Vec<Sym> {
    block
        .mentioned_symbols()
        .into_iter()
        .filter(|s| pattern.node_vars.contains(s) || pattern.fresh_nodes.contains(s))
        .collect()
}

/// Locks every node the precondition cites, allocated nodes included.
pub fn guess_locks(block: &BlockSpec, pattern: &BlockPattern, binding: &Binding) -> LockSet {
    LockSet::new(precondition_nodes(block, pattern).into_iter().map(|n| binding.image(n)))
}

/// Binary relations that follow pointer fields, with their direction:
/// `true` when `r(a, b)` means a points to b, `false` when b points to a.
/// Derived relations count when every rule for them copies a single
/// oriented relation, possibly swapping its arguments.
pub fn oriented_relations(model: &Model) -> BTreeMap<Sym, bool> {
    let mut out: BTreeMap<Sym, bool> = model.ops.pointer_fields().into_iter().map(|(r, _)| (r, true)).collect();
    loop {
        let mut changed = false;
        let heads: BTreeSet<Sym> = model
            .theory
            .definitions()
            .filter_map(|r| r.head.as_ref())
            .filter(|h| h.args.len() == 2 && !out.contains_key(&h.pred))
            .map(|h| h.pred)
            .collect();
        for p in heads {
            let mut dir = None;
            let mut ok = true;
            for r in model.theory.definitions().filter(|r| r.head.as_ref().is_some_and(|h| h.pred == p)) {
                let h = r.head.as_ref().expect("definition has a head");
                let d = match r.body.as_slice() {
                    [l] if !l.negated && l.atom.args.len() == 2 => out.get(&l.atom.pred).and_then(|fwd| {
                        let (a, b) = (l.atom.args[0].sym(), l.atom.args[1].sym());
                        let (x, y) = (h.args[0].sym(), h.args[1].sym());
                        if (a, b) == (x, y) {
                            Some(*fwd)
                        } else if (a, b) == (y, x) {
                            Some(!*fwd)
                        } else {
                            None
                        }
                    }),
                    _ => None,
                };
                match (d, dir) {
                    (Some(d), None) => dir = Some(d),
                    (Some(d), Some(e)) if d == e => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if let (true, Some(d)) = (ok, dir) {
                out.insert(p, d);
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Precondition nodes in the uniform acquisition order: nodes without a
/// pointer predecessor in the precondition by first mention, then their
/// successors breadth-first. `None` if the pointer literals form a cycle.
pub fn lock_order(model: &Model, block: &BlockSpec, pattern: &BlockPattern) -> Option<Vec<Sym>> {
    let nodes = precondition_nodes(block, pattern);
    let oriented = oriented_relations(model);
    let edges: Vec<(Sym, Sym)> = block
        .precondition
        .iter()
        .filter(|l| !l.negated && l.atom.args.len() == 2)
        .filter_map(|l| {
            let (a, b) = (l.atom.args[0].sym(), l.atom.args[1].sym());
            oriented.get(&l.atom.pred).map(|fwd| if *fwd { (a, b) } else { (b, a) })
        })
        .filter(|(a, b)| nodes.contains(a) && nodes.contains(b))
        .collect();
    let roots: Vec<Sym> = nodes
        .iter()
        .copied()
        .filter(|n| !edges.iter().any(|(_, b)| b == n))
        .collect();
    let mut out = roots.clone();
    let mut seen: BTreeSet<Sym> = roots.iter().copied().collect();
    let mut queue: VecDeque<Sym> = roots.into();
    while let Some(n) = queue.pop_front() {
        for (_, b) in edges.iter().filter(|(a, _)| *a == n) {
            if seen.insert(*b) {
                out.push(*b);
                queue.push_back(*b);
            }
        }
    }
    (out.len() == nodes.len()).then_some(out)
}

/// The pattern-level lock list of abstract code: cited nodes that exist
/// before the block runs, in [`lock_order`] (first mention if cyclic).
pub fn abstract_locks(model: &Model, block: &BlockSpec, pattern: &BlockPattern) -> Vec<Sym> {
    lock_order(model, block, pattern)
        .unwrap_or_else(|| precondition_nodes(block, pattern))
        .into_iter()
        .filter(|n| !pattern.fresh_nodes.contains(n))
        .collect()
}
