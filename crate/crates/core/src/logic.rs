//! Terms, atoms, literals, rules and ground facts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::knowledge::syntax::{PTerm, Pos, SyntaxError};
use crate::symbol::Sym;

pub const LT: &str = "lt";
pub const EQ: &str = "eq";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Sym),
    Var(Sym),
}

impl Term {
    pub fn var(self) -> Option<Sym> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn sym(self) -> Sym {
        match self {
            Term::Const(s) | Term::Var(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sym())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom {
            pred: Sym::new(pred),
            args,
        }
    }

    pub fn is_comparison(&self) -> bool {
        let p = self.pred.as_str();
        (p == LT || p == EQ) && self.args.len() == 2
    }

    pub fn vars(&self) -> impl Iterator<Item = Sym> + '_ {
        self.args.iter().filter_map(|t| t.var())
    }

    /// Grounds the atom if every variable is bound.
    pub fn ground(&self, env: &BTreeMap<Sym, Sym>) -> Option<Fact> {
        let mut args = Vec::with_capacity(self.args.len());
        for t in &self.args {
            match t {
                Term::Const(c) => args.push(*c),
                Term::Var(v) => args.push(*env.get(v)?),
            }
        }
        Some(Fact { pred: self.pred, args })
    }

    /// Replaces constants according to `map`, leaving others untouched.
    pub fn rename_consts(&self, map: &BTreeMap<Sym, Sym>) -> Atom {
        Atom {
            pred: self.pred,
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Term::Const(*map.get(c).unwrap_or(c)),
                    v => *v,
                })
                .collect(),
        }
    }

    pub fn from_pterm(t: &PTerm, pos: Pos) -> Result<Atom, SyntaxError> {
        match t {
            PTerm::Ident(name) => Ok(Atom {
                pred: Sym::new(name),
                args: vec![],
            }),
            PTerm::Compound(name, args) => {
                let mut out = Vec::with_capacity(args.len());
                for a in args {
                    out.push(term_from_pterm(a, pos)?);
                }
                Ok(Atom {
                    pred: Sym::new(name),
                    args: out,
                })
            }
            other => Err(SyntaxError::new(pos, format!("expected an atom, found {other}"))),
        }
    }
}

pub fn term_from_pterm(t: &PTerm, pos: Pos) -> Result<Term, SyntaxError> {
    match t {
        PTerm::Ident(s) => Ok(Term::Const(Sym::new(s))),
        PTerm::Var(s) => Ok(Term::Var(Sym::new(s))),
        PTerm::Str(s) => Ok(Term::Const(Sym::new(s))),
        other => Err(SyntaxError::new(
            pos,
            format!("function symbols are not supported: {other}"),
        )),
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub negated: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            negated: false,
            atom,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            negated: true,
            atom,
        }
    }

    /// Reads `p(..)`, `not(p(..))` or `not p(..)` list items.
    pub fn from_pterm(t: &PTerm, pos: Pos) -> Result<Literal, SyntaxError> {
        if let PTerm::Compound(name, args) = t {
            if name == "not" && args.len() == 1 {
                return Ok(Literal::neg(Atom::from_pterm(&args[0], pos)?));
            }
        }
        Ok(Literal::pos(Atom::from_pterm(t, pos)?))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not({})", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Definition,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        if self.head.is_some() {
            RuleKind::Definition
        } else {
            RuleKind::Constraint
        }
    }

    /// Variables occurring in a positive, non-comparison body literal.
    pub fn positive_vars(&self) -> BTreeSet<Sym> {
        self.body
            .iter()
            .filter(|l| !l.negated && !l.atom.is_comparison())
            .flat_map(|l| l.atom.vars())
            .collect()
    }

    /// Names the first variable that breaks range restriction, if any.
    pub fn unsafe_variable(&self) -> Option<Sym> {
        let bound = self.positive_vars();
        let head_vars = self.head.iter().flat_map(|h| h.vars());
        let other = self
            .body
            .iter()
            .filter(|l| l.negated || l.atom.is_comparison())
            .flat_map(|l| l.atom.vars());
        head_vars.chain(other).find(|v| !bound.contains(v))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.head {
            write!(f, "{h}")?;
            if !self.body.is_empty() {
                f.write_str(" :- ")?;
            }
        } else {
            f.write_str(":- ")?;
        }
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if l.negated {
                write!(f, "not {}", l.atom)?;
            } else {
                write!(f, "{}", l.atom)?;
            }
        }
        f.write_str(".")
    }
}

/// A ground atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub pred: Sym,
    pub args: Vec<Sym>,
}

impl Fact {
    pub fn new(pred: &str, args: &[&str]) -> Self {
        Fact {
            pred: Sym::new(pred),
            args: args.iter().map(|a| Sym::new(a)).collect(),
        }
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            pred: self.pred,
            args: self.args.iter().map(|a| Term::Const(*a)).collect(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}
