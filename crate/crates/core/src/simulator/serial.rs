//! Set-semantics oracle for final outcomes.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::symbol::Sym;

/// Keys one committed operation adds to and removes from the abstract
/// set, observed on the state it validated against.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct SetEffect {
    pub added: BTreeSet<Sym>,
    pub removed: BTreeSet<Sym>,
}

impl SetEffect {
    pub fn apply(&self, set: &BTreeSet<Sym>) -> BTreeSet<Sym> {
        let mut out: BTreeSet<Sym> = set.difference(&self.removed).copied().collect();
        out.extend(self.added.iter().copied());
        out
    }
}

/// True iff some permutation of `committed`, applied one after another to
/// `initial`, yields `final_set`.
pub fn check_serializability(initial: &BTreeSet<Sym>, final_set: &BTreeSet<Sym>, committed: &[SetEffect]) -> bool {
    let mut used = vec![false; committed.len()];
    permute(initial, final_set, committed, &mut used)
}

fn permute(set: &BTreeSet<Sym>, goal: &BTreeSet<Sym>, ops: &[SetEffect], used: &mut Vec<bool>) -> bool {
    if used.iter().all(|u| *u) {
        return set == goal;
    }
    for i in 0..ops.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let ok = permute(&ops[i].apply(set), goal, ops, used);
        used[i] = false;
        if ok {
            return true;
        }
    }
    false
}
