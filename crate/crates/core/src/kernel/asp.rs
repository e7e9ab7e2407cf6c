//! One-way export of the time-indexed program in ASP-Core-2 syntax, for
//! cross-checking against an external solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::knowledge::operations::Effect;
use crate::logic::{Atom, Fact, Literal, Rule, Term};
use crate::symbol::Sym;

use super::keys::KeyOrder;
use super::state::FactSet;
use super::Model;

/// A ground interference event offered to the solver as an abducible.
#[derive(Debug, Clone)]
pub struct AspEvent {
    pub label: String,
    pub precondition: Vec<Literal>,
    pub effects: Vec<Effect>,
}

fn constant(s: Sym) -> String {
    let text = s.as_str().replace('\'', "_p");
    if Sym::is_variable_name(&text) || text.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        format!("\"{text}\"")
    } else {
        text
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Const(c) => constant(*c),
        Term::Var(v) => v.to_string(),
    }
}

fn atom_text(a: &Atom, time: Option<&str>) -> String {
    let mut args: Vec<String> = a.args.iter().map(term).collect();
    if let Some(t) = time {
        args.push(t.to_string());
    }
    if args.is_empty() {
        a.pred.to_string()
    } else {
        format!("{}({})", a.pred, args.join(","))
    }
}

fn fact_text(f: &Fact, time: Option<&str>) -> String {
    atom_text(&f.to_atom(), time)
}

fn literal_text(l: &Literal, fluents: &BTreeSet<Sym>, time: &str) -> String {
    let t = if fluents.contains(&l.atom.pred) { Some(time) } else { None };
    let a = atom_text(&l.atom, t);
    if l.negated {
        format!("not {a}")
    } else {
        a
    }
}

fn reify(rule: &Rule, fluents: &BTreeSet<Sym>) -> String {
    let mut body = vec!["time(T)".to_string()];
    body.extend(rule.body.iter().map(|l| literal_text(l, fluents, "T")));
    match &rule.head {
        Some(h) => {
            let t = if fluents.contains(&h.pred) { Some("T") } else { None };
            format!("{} :- {}.", atom_text(h, t), body.join(", "))
        }
        None => format!(":- {}.", body.join(", ")),
    }
}

/// Renders the program for `(facts, order)` over times `0..=horizon`.
pub fn export_asp(
    model: &Model,
    facts: &FactSet,
    order: &KeyOrder,
    horizon: usize,
    events: &[AspEvent],
) -> String {
    let theory = &model.theory;
    let fluents = &theory.fluents;
    let mut out = String::new();
    let _ = writeln!(out, "% time-indexed program, horizon {horizon}");
    let _ = writeln!(out, "time(0..{horizon}).");
    let _ = writeln!(out, "\n% instance");
    for f in facts {
        let t = if fluents.contains(&f.pred) { Some("0") } else { None };
        let _ = writeln!(out, "{}.", fact_text(f, t));
    }
    for (a, b) in order.less_than_pairs() {
        let _ = writeln!(out, "lt({},{}).", constant(a), constant(b));
    }
    for (a, b) in order.equal_pairs() {
        let _ = writeln!(out, "eq({},{}).", constant(a), constant(b));
    }
    for k in order.keys() {
        let _ = writeln!(out, "eq({0},{0}).", constant(k));
    }

    let _ = writeln!(out, "\n% theory");
    for r in theory.rules.iter() {
        if r.body.is_empty() {
            if let Some(h) = &r.head {
                if fluents.contains(&h.pred) {
                    let _ = writeln!(out, "{} :- time(T).", atom_text(h, Some("T")));
                } else {
                    let _ = writeln!(out, "{}.", atom_text(h, None));
                }
                continue;
            }
        }
        let _ = writeln!(out, "{}", reify(r, fluents));
    }
    for inv in &theory.invariants {
        let _ = writeln!(out, ":- time(T), not {inv}(T).");
    }

    if horizon == 0 {
        return out;
    }

    let _ = writeln!(out, "\n% interference abducibles");
    let mut positions: BTreeMap<Sym, usize> = BTreeMap::new();
    for k in model.ops.step_kinds.values() {
        positions.insert(k.caused_relation, k.modified_argument_position);
    }
    for (i, e) in events.iter().enumerate() {
        let id = format!("e{i}");
        let _ = writeln!(out, "% {id}: {}", e.label);
        let _ = writeln!(
            out,
            "interfere({id},T) :- time(T), T < {horizon}, not neg_interfere({id},T)."
        );
        let _ = writeln!(
            out,
            "neg_interfere({id},T) :- time(T), T < {horizon}, not interfere({id},T)."
        );
        let pre: Vec<String> = e
            .precondition
            .iter()
            .map(|l| literal_text(l, fluents, "T"))
            .collect();
        let _ = writeln!(out, "pre({id},T) :- time(T), {}.", pre.join(", "));
        let _ = writeln!(out, ":- interfere({id},T), not pre({id},T).");
        for eff in &e.effects {
            let _ = writeln!(out, "{} :- interfere({id},T).", fact_text(&eff.fact, Some("T+1")));
            let _ = writeln!(
                out,
                "modified({},{},T) :- interfere({id},T).",
                eff.relation,
                constant(eff.node)
            );
        }
    }
    let _ = writeln!(out, ":- interfere(E1,T), interfere(E2,T), E1 != E2.");

    let _ = writeln!(out, "\n% inertia");
    for (rel, pos) in &positions {
        let arity = theory.predicates.get(rel).copied().unwrap_or(2);
        let vars: Vec<String> = (0..arity).map(|i| format!("X{i}")).collect();
        let args = vars.join(",");
        let _ = writeln!(
            out,
            "{rel}({args},T+1) :- time(T), T < {horizon}, {rel}({args},T), not modified({rel},X{pos},T)."
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{parse_operations, parse_theory};

    fn model() -> Model {
        let t = parse_theory(
            "list :- edge(h, X), key(h, KH), key(X, KX), KH < KX, suffix(X).
             suffix(X) :- edge(X, Y), key(X, KX), key(Y, KY), KX < KY, suffix(Y).
             suffix(t). invariant(list). fluent(list). fluent(edge). fluent(suffix).",
        )
        .unwrap();
        let o = parse_operations(
            "operation(delete). atomic_step(link). modifies(link(x,y), x). causes(link(x,y), edge(x,y)).
             precondition(delete, [edge(x, target), edge(target, y)]). program_steps(delete, [link(x, y)]).",
        )
        .unwrap();
        Model::new(t, o)
    }

    #[test]
    fn static_program_has_no_transitions() {
        let m = model();
        let facts: FactSet = [Fact::new("edge", &["h", "t"])].into_iter().collect();
        let text = export_asp(&m, &facts, &KeyOrder::new(), 0, &[]);
        assert!(text.contains("time(0..0)."));
        assert!(text.contains("edge(h,t,0)."));
        assert!(text.contains(":- time(T), not list(T)."));
        assert!(!text.contains("interfere"));
        assert!(!text.contains("T+1"));
    }

    #[test]
    fn transitions_with_horizon() {
        let m = model();
        let facts: FactSet = [Fact::new("edge", &["h", "x"]), Fact::new("edge", &["x", "t"])]
            .into_iter()
            .collect();
        let ev = AspEvent {
            label: "delete".into(),
            precondition: vec![Literal::pos(Fact::new("edge", &["h", "x"]).to_atom())],
            effects: vec![m.ops.effect(&crate::knowledge::GroundStep::new("link", &["h", "t"]))],
        };
        let text = export_asp(&m, &facts, &KeyOrder::new(), 2, &[ev]);
        assert!(text.contains("time(0..2)."));
        assert!(text.contains("edge(h,t,T+1) :- interfere(e0,T)."));
        assert!(text.contains("not modified(edge,X0,T)."));
    }
}
