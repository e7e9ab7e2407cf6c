use lockweave::analysis::{
    analyze, check_lock_adequacy, check_step_order, find_maximal_instance, interference_horizon, AnalysisOptions,
    Bounds, LockSet, Outcome, Protected, Strategy, SynthesisVerdict,
};
use lockweave::bundle::KnowledgeSet;
use lockweave::kernel::{match_block, PatternNames};
use lockweave::knowledge::GroundStep;
use lockweave::symbol::Sym;

fn list() -> KnowledgeSet {
    KnowledgeSet::bundled("linked_list").unwrap()
}

#[test]
fn list_instance_and_horizon() {
    let k = list();
    let s = find_maximal_instance(&k.model, Bounds { max_nodes: 3 }).unwrap();
    assert_eq!(s.instance.to_string(), "{edge(h,x), edge(x,t)}");
    assert_eq!(s.instance.order_text(), "kh < kx < kt");
    assert_eq!(s.rejected[0].instance, vec!["edge(h,t)"]);
    assert_eq!(s.rejected[0].inapplicable, vec!["delete::block1"]);
    assert_eq!(interference_horizon(&k.model, &s.instance), 3);
}

#[test]
fn list_insert_orders() {
    let k = list();
    let s = find_maximal_instance(&k.model, Bounds::default()).unwrap();
    let (op, b) = (Sym::new("insert"), Sym::new("case1"));
    let bad = [GroundStep::new("link", &["x", "target"]), GroundStep::new("link", &["target", "y"])];
    let c = check_step_order(&k.model, op, b, &s.instance, &bad).unwrap();
    assert!(!c.accepted);
    let v = c.violation.unwrap();
    assert_eq!((v.time, v.constraint.as_str()), (1, "list"));
    let good = [bad[1].clone(), bad[0].clone()];
    assert!(check_step_order(&k.model, op, b, &s.instance, &good).unwrap().accepted);
}

#[test]
fn list_delete_with_one_lock_is_inadequate() {
    let k = list();
    let s = find_maximal_instance(&k.model, Bounds::default()).unwrap();
    let (op, b) = (Sym::new("delete"), Sym::new("block1"));
    let bs = match_block(&k.model.eval, k.model.pattern(op, b), &s.instance.facts, &s.instance.order, &PatternNames);
    assert_eq!(bs.len(), 1);
    let x = bs[0].image(Sym::new("x"));
    let p = Protected { op, block: b, binding: &bs[0] };
    let v = check_lock_adequacy(&k.model, &s.instance, &p, &LockSet::new([x]), 3, 10_000).unwrap();
    assert_eq!(v.outcome, Outcome::Inadequate);
    assert_eq!(v.falsified_conjunct.as_deref(), Some("edge(x,t)"));
    let last = v.counterexample.unwrap().final_state().unwrap().to_vec();
    assert!(last.contains(&"edge(x,target')".to_string()), "{last:?}");
    assert!(last.contains(&"edge(target',t)".to_string()), "{last:?}");
}

fn verdict(name: &str) -> (String, SynthesisVerdict) {
    let k = KnowledgeSet::bundled(name).unwrap();
    let (s, v) = analyze(&k.model, &AnalysisOptions::default()).unwrap();
    (s.instance.to_string(), v)
}

fn code(v: &SynthesisVerdict, op: &str, block: &str) -> String {
    v.block(op, block).unwrap().abstract_code.clone().unwrap_or_default()
}

#[test]
fn list_full_analysis() {
    let (_, v) = verdict("linked_list");
    assert!(v.adequate && v.order_exists);
    assert_eq!(v.strategy, Strategy::FineGrained);
    assert!(!v.key_movement.detected());
    assert_eq!(
        code(&v, "delete", "block1"),
        "[lock(x), lock(target), lock(y), if validate(Pre), link(x,y), unlock(x), unlock(target), unlock(y)]"
    );
}

#[test]
fn ebst_full_analysis() {
    let (instance, v) = verdict("external_bst");
    assert_eq!(instance, "{left(h,l), left(l,ll), left(r,rl), right(h,r), right(l,lr), right(r,rr)}");
    assert_eq!(v.horizon, 15);
    assert!(v.adequate && v.order_exists && !v.key_movement.detected());
    assert_eq!(v.strategy, Strategy::FineGrained);
    for b in &v.blocks {
        assert_eq!(b.adequacy.outcome, Outcome::Adequate, "{}::{}", b.operation, b.block);
    }
    // Either internal link may come first; the parent link is always last.
    assert_eq!(v.block("insert", "block1").unwrap().accepted_orders.len(), 2);
    assert_eq!(
        code(&v, "insert", "block1"),
        "[lock(x), lock(y), if validate(Pre), link_left(internal,target), link_right(internal,y), link_left(x,internal), unlock(x), unlock(y)]"
    );
}

#[test]
fn ibst_full_analysis() {
    let (instance, v) = verdict("internal_bst");
    assert_eq!(instance, "{left(h,l), left(l,ll), left(lr,lrl), right(h,r), right(l,lr)}");
    assert_eq!(v.horizon, 11);
    assert!(v.adequate && !v.order_exists);
    assert!(v.key_movement.detected());
    assert_eq!(v.strategy, Strategy::Rcu);
    assert!(v.block("delete", "block3").unwrap().accepted_orders.is_empty());
    assert_eq!(code(&v, "insert", "block1"), "[lock(x), if validate(Pre), link_left(x,target), unlock(x)]");
}

#[test]
fn rb_full_analysis() {
    let (_, v) = verdict("external_rb");
    assert_eq!(v.horizon, 21);
    assert!(v.adequate && !v.order_exists && !v.key_movement.detected());
    assert!(matches!(v.strategy, Strategy::Rcu | Strategy::CoarseGrained));
    let ordered: Vec<bool> = v.blocks.iter().map(|b| !b.accepted_orders.is_empty()).collect();
    assert_eq!(ordered, [false, true, false]);
}
