//! Key movement: an update fired while a lock-free traversal is under way
//! makes the traversal miss a node that stays reachable throughout.
//!
//! The traversal is stepwise. From the root it follows the theory's
//! traversal relation `next(X, Y, K)` towards search key `K`, which is
//! supplied as a `search_key(K)` fact, until no next node exists. Every
//! node of the instance is used as a target in turn; every interference
//! event is fired after every prefix of the undisturbed path.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::kernel::{apply_steps_atomic, FactSet, KeyOrder, Model};
use crate::logic::Fact;
use crate::symbol::Sym;

use super::adequacy::interference_events;
use super::instance::key_name;
use super::InstanceGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KeyMovement {
    Detected {
        target: Sym,
        event: String,
        after: Vec<Sym>,
        visited: Vec<Sym>,
    },
    NotDetected,
    /// The theory declares no traversal relation.
    Unknown,
}

impl KeyMovement {
    pub fn detected(&self) -> bool {
        matches!(self, KeyMovement::Detected { .. })
    }
}

struct Walker<'a> {
    model: &'a Model,
    next: Sym,
    reach: Option<Sym>,
    root: Sym,
}

impl Walker<'_> {
    fn with_key(facts: &FactSet, key: Sym) -> FactSet {
        let mut s = facts.clone();
        s.insert(Fact {
            pred: Sym::new("search_key"),
            args: vec![key],
        });
        s
    }

    /// Continues a traversal from `from` until it stops; returns the
    /// nodes visited after `from`.
    fn walk(&self, facts: &FactSet, order: &KeyOrder, key: Sym, from: Sym) -> Vec<Sym> {
        let closure = self.model.closure(&Self::with_key(facts, key), order);
        let mut out = Vec::new();
        let mut at = from;
        let limit = facts.len() + 2;
        while out.len() < limit {
            let step = closure
                .tuples(self.next)
                .iter()
                .filter(|t| t.len() == 3 && t[0] == at && t[2] == key)
                .map(|t| t[1])
                .min();
            match step {
                Some(n) => {
                    out.push(n);
                    at = n;
                }
                None => break,
            }
        }
        out
    }

    fn reachable(&self, facts: &FactSet, order: &KeyOrder) -> BTreeSet<Sym> {
        let Some(r) = self.reach else {
            return BTreeSet::new();
        };
        let c = self.model.closure(facts, order);
        c.tuples(r).iter().filter_map(|t| t.first().copied()).collect()
    }
}

pub fn detect_key_movement(model: &Model, instance: &InstanceGraph) -> KeyMovement {
    let meta = &model.theory.meta;
    let Some(next) = meta.traversal else {
        return KeyMovement::Unknown;
    };
    let w = Walker {
        model,
        next,
        reach: meta.reachability,
        root: meta.root.unwrap_or_else(|| Sym::new("h")),
    };
    let events = interference_events(model, &instance.facts, &instance.order);
    let before = w.reachable(&instance.facts, &instance.order);
    for target in &instance.nodes {
        let key = key_name(*target);
        let mut path = vec![w.root];
        path.extend(w.walk(&instance.facts, &instance.order, key, w.root));
        for ev in &events {
            let Ok(order) = instance.order.union(&ev.order) else {
                continue;
            };
            let mut pre = instance.facts.clone();
            pre.extend(ev.fresh_facts.iter().cloned());
            let after_state = apply_steps_atomic(&model.ops, &pre, &ev.steps);
            let after = w.reachable(&after_state, &order);
            if !(before.contains(target) && after.contains(target)) {
                continue;
            }
            for i in 0..path.len() {
                let mut visited: Vec<Sym> = path[..=i].to_vec();
                visited.extend(w.walk(&after_state, &order, key, path[i]));
                if !visited.contains(target) {
                    return KeyMovement::Detected {
                        target: *target,
                        event: ev.label(model),
                        after: path[..=i].to_vec(),
                        visited,
                    };
                }
            }
        }
    }
    KeyMovement::NotDetected
}
