//! Background theory: rules, invariants, fluents and instance-shape hints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::syntax::{read_clauses, PTerm};
use super::KnowledgeError;
use crate::logic::{Atom, Literal, Rule, EQ, LT};
use crate::symbol::Sym;

/// Family of heap shapes the instance search enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Chain,
    BinaryTree,
}

/// How keys are laid out on generated tree instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KeyScheme {
    /// Keys strictly increase along an in-order walk over every node.
    #[default]
    Ordered,
    /// Leaves carry the keys and every inner node has two children; an
    /// inner key separates its subtrees.
    Routing,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TheoryMeta {
    pub shape: Option<ShapeFamily>,
    pub key_scheme: KeyScheme,
    pub root: Option<Sym>,
    pub tail: Option<Sym>,
    pub reachability: Option<Sym>,
    pub abstract_set: Option<Sym>,
    pub traversal: Option<Sym>,
    /// Enumerated node attributes such as `color` with their value domain.
    pub attributes: Vec<(Sym, Vec<Sym>)>,
    /// Explicitly declared base predicates.
    pub base: BTreeMap<Sym, usize>,
    /// Instance size the theory needs, overriding the search default.
    pub max_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Theory {
    pub rules: Vec<Rule>,
    pub invariants: BTreeSet<Sym>,
    pub fluents: BTreeSet<Sym>,
    pub predicates: BTreeMap<Sym, usize>,
    /// Definition-rule indices grouped into evaluation units, in
    /// dependency order. Each unit is one strongly connected component.
    pub strata: Vec<Vec<usize>>,
    pub meta: TheoryMeta,
}

impl Theory {
    pub fn definitions(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.head.is_some())
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.head.is_none())
    }

    /// Predicates that occur in some rule head.
    pub fn derived_predicates(&self) -> BTreeSet<Sym> {
        self.definitions()
            .filter(|r| !r.body.is_empty())
            .filter_map(|r| r.head.as_ref().map(|h| h.pred))
            .collect()
    }

    /// Fluents that are never derived: the heap fields steps write.
    pub fn base_fluents(&self) -> BTreeSet<Sym> {
        let derived = self.derived_predicates();
        self.fluents.iter().filter(|p| !derived.contains(p)).copied().collect()
    }

    pub fn is_attribute(&self, pred: Sym) -> bool {
        self.meta.attributes.iter().any(|(p, _)| *p == pred)
    }

    /// Renders the theory back into the knowledge syntax.
    pub fn print(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        if let Some(s) = m.shape {
            let name = match s {
                ShapeFamily::Chain => "chain",
                ShapeFamily::BinaryTree => "binary_tree",
            };
            let _ = writeln!(out, "shape({name}).");
        }
        if m.key_scheme == KeyScheme::Routing {
            let _ = writeln!(out, "key_scheme(routing).");
        }
        for (name, v) in [
            ("root", m.root),
            ("tail", m.tail),
            ("reachability", m.reachability),
            ("abstract_set", m.abstract_set),
            ("traversal", m.traversal),
        ] {
            if let Some(v) = v {
                let _ = writeln!(out, "{name}({v}).");
            }
        }
        for (attr, dom) in &m.attributes {
            let vals: Vec<String> = dom.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "attribute({attr}, [{}]).", vals.join(", "));
        }
        if let Some(n) = m.max_nodes {
            let _ = writeln!(out, "max_nodes({n}).");
        }
        for (p, a) in &m.base {
            let _ = writeln!(out, "base({p}, {a}).");
        }
        for r in &self.rules {
            let _ = writeln!(out, "{r}");
        }
        for i in &self.invariants {
            let _ = writeln!(out, "invariant({i}).");
        }
        for f in &self.fluents {
            let _ = writeln!(out, "fluent({f}).");
        }
        out
    }
}

fn ident_arg(t: &PTerm) -> Option<Sym> {
    match t {
        PTerm::Ident(s) => Some(Sym::new(s)),
        _ => None,
    }
}

pub fn parse_theory(text: &str) -> Result<Theory, KnowledgeError> {
    let clauses = read_clauses(text)?;
    let mut theory = Theory::default();
    let mut declared_at = BTreeMap::new();

    for clause in clauses {
        let pos = clause.pos;
        let Some(head) = &clause.head else {
            let body = clause
                .body
                .iter()
                .map(|b| body_literal(b.negated, &b.term, pos))
                .collect::<Result<Vec<_>, _>>()?;
            theory.rules.push(Rule { head: None, body });
            continue;
        };
        if clause.body.is_empty() {
            let name = head.name().unwrap_or("");
            let args = head.args();
            let one = args.len() == 1;
            let bad = |what: &str| {
                KnowledgeError::Syntax(super::syntax::SyntaxError::new(
                    pos,
                    format!("malformed {what} declaration"),
                ))
            };
            match name {
                "invariant" if one => {
                    let p = ident_arg(&args[0]).ok_or_else(|| bad("invariant"))?;
                    theory.invariants.insert(p);
                    declared_at.entry(p).or_insert(pos);
                    continue;
                }
                "fluent" if one => {
                    let p = ident_arg(&args[0]).ok_or_else(|| bad("fluent"))?;
                    theory.fluents.insert(p);
                    declared_at.entry(p).or_insert(pos);
                    continue;
                }
                "shape" if one => {
                    theory.meta.shape = Some(match ident_arg(&args[0]).map(|s| s.as_str()) {
                        Some("chain") => ShapeFamily::Chain,
                        Some("binary_tree") => ShapeFamily::BinaryTree,
                        _ => return Err(bad("shape")),
                    });
                    continue;
                }
                "key_scheme" if one => {
                    theory.meta.key_scheme = match ident_arg(&args[0]).map(|s| s.as_str()) {
                        Some("ordered") => KeyScheme::Ordered,
                        Some("routing") => KeyScheme::Routing,
                        _ => return Err(bad("key_scheme")),
                    };
                    continue;
                }
                "root" | "tail" | "reachability" | "abstract_set" | "traversal" if one => {
                    let v = ident_arg(&args[0]).ok_or_else(|| bad(name))?;
                    let slot = match name {
                        "root" => &mut theory.meta.root,
                        "tail" => &mut theory.meta.tail,
                        "reachability" => &mut theory.meta.reachability,
                        "abstract_set" => &mut theory.meta.abstract_set,
                        _ => &mut theory.meta.traversal,
                    };
                    *slot = Some(v);
                    continue;
                }
                "attribute" if args.len() == 2 => {
                    let attr = ident_arg(&args[0]).ok_or_else(|| bad("attribute"))?;
                    let PTerm::List(items) = &args[1] else {
                        return Err(bad("attribute"));
                    };
                    let dom = items
                        .iter()
                        .map(|i| ident_arg(i).ok_or_else(|| bad("attribute")))
                        .collect::<Result<Vec<_>, _>>()?;
                    theory.meta.attributes.push((attr, dom));
                    continue;
                }
                "max_nodes" if one => {
                    let n = match &args[0] {
                        PTerm::Ident(n) => n.parse::<usize>().map_err(|_| bad("max_nodes"))?,
                        _ => return Err(bad("max_nodes")),
                    };
                    theory.meta.max_nodes = Some(n);
                    continue;
                }
                "base" if args.len() == 2 => {
                    let p = ident_arg(&args[0]).ok_or_else(|| bad("base"))?;
                    let arity = match &args[1] {
                        PTerm::Ident(n) => n.parse::<usize>().map_err(|_| bad("base"))?,
                        _ => return Err(bad("base")),
                    };
                    theory.meta.base.insert(p, arity);
                    continue;
                }
                _ => {}
            }
        }
        let head = Atom::from_pterm(head, pos)?;
        let body = clause
            .body
            .iter()
            .map(|b| body_literal(b.negated, &b.term, pos))
            .collect::<Result<Vec<_>, _>>()?;
        theory.rules.push(Rule {
            head: Some(head),
            body,
        });
    }

    finish(&mut theory)?;
    Ok(theory)
}

fn body_literal(
    negated: bool,
    term: &PTerm,
    pos: super::syntax::Pos,
) -> Result<Literal, KnowledgeError> {
    let mut lit = Literal::from_pterm(term, pos)?;
    if negated {
        lit.negated = !lit.negated;
    }
    Ok(lit)
}

/// Builds the predicate registry, checks safety and computes strata.
fn finish(theory: &mut Theory) -> Result<(), KnowledgeError> {
    let mut registry: BTreeMap<Sym, usize> = theory.meta.base.clone();
    let note = |atom: &Atom, registry: &mut BTreeMap<Sym, usize>| -> Result<(), KnowledgeError> {
        if atom.is_comparison() {
            return Ok(());
        }
        match registry.get(&atom.pred) {
            Some(&a) if a != atom.args.len() => Err(KnowledgeError::ArityMismatch {
                predicate: atom.pred.to_string(),
                expected: a,
                found: atom.args.len(),
            }),
            Some(_) => Ok(()),
            None => {
                registry.insert(atom.pred, atom.args.len());
                Ok(())
            }
        }
    };
    for rule in &theory.rules {
        if let Some(h) = &rule.head {
            if h.is_comparison() {
                return Err(KnowledgeError::UnsafeRule {
                    rule: rule.to_string(),
                    detail: "comparison predicates cannot be defined".into(),
                });
            }
            note(h, &mut registry)?;
        }
        for l in &rule.body {
            if l.negated && l.atom.is_comparison() {
                return Err(KnowledgeError::UnsafeRule {
                    rule: rule.to_string(),
                    detail: "comparison literals may only appear positively".into(),
                });
            }
            note(&l.atom, &mut registry)?;
        }
        if let Some(v) = rule.unsafe_variable() {
            return Err(KnowledgeError::UnsafeRule {
                rule: rule.to_string(),
                detail: format!("variable {v} is not bound by a positive body literal"),
            });
        }
    }
    for (attr, _) in &theory.meta.attributes {
        registry.entry(*attr).or_insert(2);
    }
    for p in theory.invariants.iter().chain(theory.fluents.iter()) {
        if !registry.contains_key(p) {
            return Err(KnowledgeError::UndeclaredPredicate {
                name: p.to_string(),
            });
        }
    }
    theory.predicates = registry;
    theory.strata = stratify(&theory.rules)?;

    // An invariant must be a fluent or depend on fluents only.
    let derived = theory.derived_predicates();
    for inv in &theory.invariants {
        if theory.fluents.contains(inv) {
            continue;
        }
        let deps = dependencies(&theory.rules, *inv);
        let base_deps: Vec<_> = deps.iter().filter(|d| !derived.contains(d)).collect();
        if base_deps.is_empty() || base_deps.iter().any(|d| !theory.fluents.contains(d)) {
            return Err(KnowledgeError::InvariantNotFluent {
                name: inv.to_string(),
            });
        }
    }
    Ok(())
}

fn dependencies(rules: &[Rule], root: Sym) -> BTreeSet<Sym> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(p) = stack.pop() {
        for r in rules.iter().filter(|r| r.head.as_ref().is_some_and(|h| h.pred == p)) {
            for l in &r.body {
                if !l.atom.is_comparison() && seen.insert(l.atom.pred) {
                    stack.push(l.atom.pred);
                }
            }
        }
    }
    seen
}

/// Groups definition rules into strongly connected components of the
/// predicate dependency graph, in evaluation order. Fails when a
/// component contains a negative edge.
pub fn stratify(rules: &[Rule]) -> Result<Vec<Vec<usize>>, KnowledgeError> {
    let preds: BTreeSet<Sym> = rules
        .iter()
        .flat_map(|r| {
            r.head
                .iter()
                .map(|h| h.pred)
                .chain(r.body.iter().filter(|l| !l.atom.is_comparison()).map(|l| l.atom.pred))
        })
        .collect();
    let index: BTreeMap<Sym, usize> = preds.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let n = preds.len();
    // edges: head -> body predicate (head depends on body)
    let mut edges: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for r in rules {
        let Some(h) = &r.head else { continue };
        let hi = index[&h.pred];
        for l in r.body.iter().filter(|l| !l.atom.is_comparison()) {
            edges[hi].push((index[&l.atom.pred], l.negated));
        }
    }
    let comps = tarjan(n, &edges);
    let mut comp_of = vec![0; n];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    let names: Vec<Sym> = preds.iter().copied().collect();
    for (v, out) in edges.iter().enumerate() {
        for &(w, neg) in out {
            if neg && comp_of[v] == comp_of[w] {
                let mut cycle: Vec<String> =
                    comps[comp_of[v]].iter().map(|&i| names[i].to_string()).collect();
                cycle.sort();
                return Err(KnowledgeError::Stratification { cycle });
            }
        }
    }
    // Tarjan emits components in reverse topological order of the
    // "depends on" relation, i.e. dependencies first.
    let mut strata = Vec::new();
    for comp in &comps {
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let unit: Vec<usize> = rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.head.as_ref().is_some_and(|h| members.contains(&index[&h.pred])))
            .map(|(i, _)| i)
            .collect();
        if !unit.is_empty() {
            strata.push(unit);
        }
    }
    Ok(strata)
}

fn tarjan(n: usize, edges: &[Vec<(usize, bool)>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        edges: &'a [Vec<(usize, bool)>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(st: &mut St<'_>, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &(w, _) in &st.edges[v] {
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort();
            st.out.push(comp);
        }
    }
    let mut st = St {
        edges,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}

/// True for the built-in key comparison predicates.
pub fn is_builtin(pred: Sym) -> bool {
    let p = pred.as_str();
    p == LT || p == EQ
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const LIST_THEORY: &str = "
list :- edge(h, X), key(h, KH), key(X, KX), KH < KX, suffix(X).
suffix(X) :- edge(X, Y), key(X, KX), key(Y, KY), KX < KY, suffix(Y).
suffix(t).
reach(h).      reach(X) :- edge(Y, X), reach(Y).
present(K) :- reach(X), key(X, K).
invariant(list). fluent(list). fluent(reach). fluent(edge).
fluent(suffix). fluent(present).
";

    fn syms(names: &[&str]) -> BTreeSet<Sym> {
        names.iter().map(|n| Sym::new(n)).collect()
    }

    #[test]
    fn list_theory_declarations() {
        let t = parse_theory(LIST_THEORY).unwrap();
        assert_eq!(t.invariants, syms(&["list"]));
        assert_eq!(t.fluents, syms(&["list", "reach", "edge", "suffix", "present"]));
        assert_eq!(t.predicates[&Sym::new("edge")], 2);
        assert_eq!(t.base_fluents(), syms(&["edge"]));
    }

    #[test]
    fn empty_text_is_empty_theory() {
        let t = parse_theory("").unwrap();
        assert!(t.rules.is_empty());
        assert!(t.invariants.is_empty());
    }

    #[test]
    fn self_negation_is_rejected() {
        match parse_theory("p :- not p.") {
            Err(KnowledgeError::Stratification { cycle }) => assert_eq!(cycle, vec!["p"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_cycle_through_two_predicates() {
        let err = parse_theory("a :- not b. b :- c. c :- a.").unwrap_err();
        match err {
            KnowledgeError::Stratification { cycle } => assert_eq!(cycle, vec!["a", "b", "c"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undeclared_fluent_is_an_error() {
        let err = parse_theory("p :- q. fluent(r).").unwrap_err();
        assert!(matches!(err, KnowledgeError::UndeclaredPredicate { .. }));
    }

    #[test]
    fn unsafe_rule_is_rejected() {
        let err = parse_theory("p(X) :- not q(X).").unwrap_err();
        assert!(matches!(err, KnowledgeError::UnsafeRule { .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_theory("p(a).\nq(.").unwrap_err();
        match err {
            KnowledgeError::Syntax(e) => assert_eq!(e.line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strata_put_dependencies_first() {
        let t = parse_theory(LIST_THEORY).unwrap();
        let pos_of = |name: &str| {
            t.strata
                .iter()
                .position(|u| {
                    u.iter()
                        .any(|&i| t.rules[i].head.as_ref().unwrap().pred == Sym::new(name))
                })
                .unwrap()
        };
        assert!(pos_of("suffix") < pos_of("list"));
        assert!(pos_of("reach") < pos_of("present"));
    }

    #[test]
    fn print_reparses() {
        let t = parse_theory(LIST_THEORY).unwrap();
        let again = parse_theory(&t.print()).unwrap();
        assert_eq!(t, again);
    }
}
