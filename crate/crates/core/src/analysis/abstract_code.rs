//! Lock, validate, run the ordered steps, unlock.

use std::fmt;

use serde::Serialize;

use crate::knowledge::{BlockSpec, GroundStep};
use crate::symbol::Sym;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractStmt {
    Lock(Sym),
    Validate(Vec<String>),
    Step(GroundStep),
    Unlock(Sym),
}

impl fmt::Display for AbstractStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractStmt::Lock(n) => write!(f, "lock({n})"),
            AbstractStmt::Unlock(n) => write!(f, "unlock({n})"),
            AbstractStmt::Step(s) => write!(f, "{s}"),
            AbstractStmt::Validate(_) => f.write_str("if validate(Pre)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AbstractCode {
    pub stmts: Vec<AbstractStmt>,
}

impl fmt::Display for AbstractCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.stmts.iter().map(|s| s.to_string()).collect();
        write!(f, "[{}]", s.join(", "))
    }
}

/// Locks are taken and released in the same order.
pub fn synthesize_abstract(block: &BlockSpec, locks: &[Sym], order: &[GroundStep]) -> AbstractCode {
    let mut stmts: Vec<AbstractStmt> = locks.iter().map(|n| AbstractStmt::Lock(*n)).collect();
    let pre = block
        .precondition
        .iter()
        .map(|l| if l.negated { format!("not {}", l.atom) } else { l.atom.to_string() })
        .collect();
    stmts.push(AbstractStmt::Validate(pre));
    stmts.extend(order.iter().cloned().map(AbstractStmt::Step));
    stmts.extend(locks.iter().map(|n| AbstractStmt::Unlock(*n)));
    AbstractCode { stmts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_only() {
        let b = BlockSpec {
            id: Sym::new("block1"),
            precondition: vec![],
            steps: vec![],
            postcondition: vec![],
        };
        assert_eq!(synthesize_abstract(&b, &[], &[]).to_string(), "[if validate(Pre)]");
    }
}
