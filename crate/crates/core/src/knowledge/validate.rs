//! Cross-checks between a theory and the operation knowledge.

use std::fmt;

use serde::Serialize;

use super::operations::Operations;
use super::theory::Theory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

pub fn validate_knowledge(theory: &Theory, ops: &Operations) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if theory.invariants.is_empty() {
        out.push(Diagnostic::warning("no invariant declared".into()));
    }
    for w in &ops.warnings {
        out.push(Diagnostic::warning(w.clone()));
    }
    let mut reported = Vec::new();
    for op in &ops.operations {
        for block in &op.blocks {
            for lit in block.precondition.iter().chain(&block.postcondition) {
                if lit.atom.is_comparison() {
                    continue;
                }
                let p = lit.atom.pred;
                match theory.predicates.get(&p) {
                    None => {
                        if !reported.contains(&p) {
                            reported.push(p);
                            out.push(Diagnostic::error(format!("undeclared predicate {p}")));
                        }
                    }
                    Some(&arity) if arity != lit.atom.args.len() => {
                        out.push(Diagnostic::error(format!(
                            "{}::{} uses {p} with arity {}, declared {arity}",
                            op.name,
                            block.id,
                            lit.atom.args.len()
                        )));
                    }
                    Some(_) => {}
                }
            }
            if block.steps.is_empty() {
                out.push(Diagnostic::warning(format!(
                    "{}::{} has no program steps",
                    op.name, block.id
                )));
            }
        }
    }
    for kind in ops.step_kinds.values() {
        if !theory.fluents.contains(&kind.caused_relation) {
            out.push(Diagnostic::error(format!(
                "step {} causes {}, which is not a fluent",
                kind.name, kind.caused_relation
            )));
        }
    }
    for inv in &theory.invariants {
        if !theory.predicates.contains_key(inv) {
            out.push(Diagnostic::error(format!("invariant {inv} cannot be evaluated")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::operations::parse_operations;
    use crate::knowledge::theory::parse_theory;

    const THEORY: &str = "
list :- edge(h, X), key(h, KH), key(X, KX), KH < KX, suffix(X).
suffix(X) :- edge(X, Y), key(X, KX), key(Y, KY), KX < KY, suffix(Y).
suffix(t).
reach(h).      reach(X) :- edge(Y, X), reach(Y).
present(K) :- reach(X), key(X, K).
invariant(list). fluent(list). fluent(reach). fluent(edge).
fluent(suffix). fluent(present).
";

    const OPS: &str = "
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
    fn list_knowledge_is_clean() {
        let t = parse_theory(THEORY).unwrap();
        let o = parse_operations(OPS).unwrap();
        assert_eq!(validate_knowledge(&t, &o), vec![]);
    }

    #[test]
    fn undeclared_color() {
        let t = parse_theory(THEORY).unwrap();
        let o = parse_operations(
            "operation(op). atomic_step(link). modifies(link(x,y), x). causes(link(x,y), edge(x,y)).
             precondition(op, [edge(x, y), color(x, red)]). program_steps(op, [link(x, y)]).",
        )
        .unwrap();
        let d = validate_knowledge(&t, &o);
        assert!(d.iter().any(|d| d.message == "undeclared predicate color"));
    }

    #[test]
    fn missing_invariant_warns() {
        let t = parse_theory("reach(h).").unwrap();
        let d = validate_knowledge(&t, &Operations::default());
        assert_eq!(d, vec![Diagnostic::warning("no invariant declared".into())]);
    }
}
