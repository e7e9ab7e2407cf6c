mod support;

use std::sync::OnceLock;

use lockweave::analysis::{analyze, AnalysisOptions, Strategy, SynthesisVerdict};
use lockweave::bundle::KnowledgeSet;
use lockweave::codegen::{
    generate, infer_l_value, infer_r_value, plan_allocations, plan_lock_order, render_block, render_rcu,
    substitute_annotations, BlockContext, CodegenError, EmittedFile,
};
use lockweave::knowledge::{parse_template, GroundStep};
use lockweave::symbol::Sym;
use support::tokens;

struct Synth {
    set: KnowledgeSet,
    verdict: SynthesisVerdict,
    files: Vec<EmittedFile>,
}

fn synth(name: &str) -> &'static Synth {
    static CACHE: OnceLock<Vec<Synth>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        ["linked_list", "external_bst", "internal_bst"]
            .iter()
            .map(|n| {
                let set = KnowledgeSet::bundled(n).unwrap();
                let (_, verdict) = analyze(&set.model, &AnalysisOptions::default()).unwrap();
                let files = generate(&set, &verdict).unwrap();
                Synth { set, verdict, files }
            })
            .collect()
    });
    all.iter().find(|s| s.set.name == name).unwrap()
}

fn cx<'a>(set: &'a KnowledgeSet, op: &str, block: &str) -> BlockContext<'a> {
    BlockContext::new(&set.model, &set.mappings, op, block).unwrap()
}

#[test]
fn ext_bst_block1_matches_the_golden_fixture() {
    let s = synth("external_bst");
    let insert = s.files.iter().find(|f| f.name == "insert").unwrap();
    let p = insert
        .code
        .provenance
        .iter()
        .find(|p| p.anchor == "@@insert_ext_tree::block1")
        .unwrap();
    let golden = include_str!("fixtures/ext_bst_insert_block1.cpp");
    assert_eq!(tokens(&p.rendered.lines().join("\n")), tokens(golden));
    assert_eq!(p.rendered.lock_nodes, ["x", "target", "internal", "y"]);
}

#[test]
fn l_values() {
    let list = &synth("linked_list").set;
    let ebst = &synth("external_bst").set;
    let ibst = &synth("internal_bst").set;
    let c = cx(list, "delete", "block1");
    assert_eq!(infer_l_value(&c, Sym::new("y")).unwrap(), "curr->next");
    assert_eq!(infer_l_value(&c, Sym::new("x")).unwrap(), "pred");
    let c = cx(ebst, "insert", "block1");
    assert_eq!(infer_l_value(&c, Sym::new("x")).unwrap(), "parent");
    assert_eq!(infer_l_value(&c, Sym::new("internal")).unwrap(), "internal");
    let c = cx(ebst, "delete", "block1");
    assert_eq!(infer_l_value(&c, Sym::new("s")).unwrap(), "parent->right");
    let c = cx(ibst, "insert", "block1");
    assert_eq!(infer_l_value(&c, Sym::new("target")).unwrap(), "target");
}

#[test]
fn unmapped_node_without_predecessor_has_no_l_value() {
    let mut set = KnowledgeSet::bundled("linked_list").unwrap();
    set.mappings.variable_map.retain(|e| !(e.operation == "delete" && e.node == "x"));
    let c = cx(&set, "delete", "block1");
    let e = infer_l_value(&c, Sym::new("x")).unwrap_err();
    assert!(matches!(e, CodegenError::NoLValue { ref node, .. } if node == "x"));
}

#[test]
fn r_values() {
    let ebst = &synth("external_bst").set;
    let c = cx(ebst, "insert", "block1");
    assert_eq!(infer_r_value(&c, Sym::new("target"), "key").unwrap(), "key");
    assert_eq!(infer_r_value(&c, Sym::new("internal"), "key").unwrap(), "curr->key");
    let c = cx(ebst, "insert", "block2");
    assert_eq!(infer_r_value(&c, Sym::new("internal"), "key").unwrap(), "key");
    let e = infer_r_value(&c, Sym::new("internal"), "color").unwrap_err();
    assert!(e.to_string().contains("internal->color"), "{e}");
}

#[test]
fn allocations() {
    let list = &synth("linked_list").set;
    let c = cx(list, "delete", "block1");
    let (a, i, k) = plan_allocations(&c, &c.spec.steps).unwrap();
    assert!(a.is_empty() && i.is_empty() && k.is_empty());
    let c = cx(list, "insert", "case1");
    let (a, i, k) = plan_allocations(&c, &c.spec.steps).unwrap();
    assert_eq!(a, ["struct node * target = (struct node *) malloc(sizeof(struct node));"]);
    assert_eq!(i, ["target->next = NULL;"]);
    assert_eq!(k, ["target->key = key;"]);
}

#[test]
fn lock_orders() {
    let names = |v: Vec<Sym>| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let c = cx(&synth("linked_list").set, "insert", "case1");
    assert_eq!(names(plan_lock_order(&c).unwrap()), ["x", "target", "y"]);
    let c = cx(&synth("external_bst").set, "insert", "block1");
    assert_eq!(names(plan_lock_order(&c).unwrap()), ["x", "target", "internal", "y"]);
    let c = cx(&synth("internal_bst").set, "delete", "block3");
    assert_eq!(names(plan_lock_order(&c).unwrap()), ["p", "target", "cl", "r", "s"]);
}

#[test]
fn list_delete_is_a_single_update() {
    let set = &synth("linked_list").set;
    let c = cx(set, "delete", "block1");
    let b = render_block(&c, &c.spec.steps).unwrap();
    assert_eq!(b.update_statements, ["pred->next = curr->next;"]);
}

#[test]
fn empty_order_is_rejected() {
    let set = &synth("linked_list").set;
    let c = cx(set, "delete", "block1");
    assert!(matches!(render_block(&c, &[]), Err(CodegenError::EmptyBlock { .. })));
}

#[test]
fn missing_validation_is_rejected() {
    let mut set = KnowledgeSet::bundled("linked_list").unwrap();
    set.mappings.validations.clear();
    let c = cx(&set, "delete", "block1");
    let e = render_block(&c, &c.spec.steps).unwrap_err();
    assert!(matches!(e, CodegenError::MissingValidation { .. }));
}

#[test]
fn template_without_anchors_is_unchanged() {
    let t = parse_template("int f(){\n  return 1;\n}\n").unwrap();
    let set = &synth("linked_list").set;
    let out = substitute_annotations(&t, &[], &set.mappings).unwrap();
    assert_eq!(out.text, "int f(){\n  return 1;\n}\n");
}

#[test]
fn missing_render_names_the_block() {
    let s = synth("external_bst");
    let t = &s.set.templates.iter().find(|t| t.name == "insert").unwrap().template;
    let blocks: Vec<_> = s.files[0]
        .code
        .provenance
        .iter()
        .map(|p| p.rendered.clone())
        .filter(|b| b.block != "block3")
        .collect();
    let e = substitute_annotations(t, &blocks, &s.set.mappings).unwrap_err();
    assert!(e.to_string().contains("block3"), "{e}");
}

#[test]
fn full_ext_bst_insert_has_four_blocks() {
    let s = synth("external_bst");
    let f = s.files.iter().find(|f| f.name == "insert").unwrap();
    assert_eq!(f.code.provenance.len(), 4);
    assert!(!f.code.text.contains("@@"));
}

#[test]
fn emitted_text_is_a_fixpoint() {
    for name in ["linked_list", "external_bst", "internal_bst"] {
        let s = synth(name);
        for f in &s.files {
            let again = parse_template(&f.code.text).unwrap();
            let out = substitute_annotations(&again, &[], &s.set.mappings).unwrap();
            assert_eq!(out.text, f.code.text);
        }
    }
}

#[test]
fn unlocks_mirror_locks() {
    for name in ["linked_list", "external_bst", "internal_bst"] {
        for f in &synth(name).files {
            for p in &f.code.provenance {
                let b = &p.rendered;
                let l: Vec<_> = b.lock_statements.iter().map(|s| s.replace(".lock()", "")).collect();
                let u: Vec<_> = b.unlock_statements.iter().map(|s| s.replace(".unlock()", "")).collect();
                assert_eq!(l, u);
                let mut seen = l.clone();
                seen.sort();
                seen.dedup();
                assert_eq!(seen.len(), l.len(), "l-values collide in {}", p.anchor);
            }
        }
    }
}

/// Parses `a->f = b;` back into a step against the block's l-values.
fn parse_update(c: &BlockContext, stmt: &str) -> GroundStep {
    let (lhs, rhs) = stmt.trim_end_matches(';').split_once(" = ").unwrap();
    let (node_lv, field) = lhs.rsplit_once("->").unwrap();
    let node_of = |lv: &str| -> Sym {
        if lv == "NULL" {
            return Sym::new("nil");
        }
        c.spec
            .mentioned_symbols()
            .into_iter()
            .find(|n| infer_l_value(c, *n).ok().as_deref() == Some(lv))
            .unwrap_or_else(|| panic!("no node renders as {lv}"))
    };
    let kind = match field {
        "next" => "link",
        "left" => "link_left",
        "right" => "link_right",
        other => panic!("field {other}"),
    };
    GroundStep {
        kind: Sym::new(kind),
        args: vec![node_of(node_lv), node_of(rhs)],
    }
}

#[test]
fn updates_follow_the_accepted_order() {
    for name in ["linked_list", "external_bst", "internal_bst"] {
        let s = synth(name);
        for f in &s.files {
            for p in &f.code.provenance {
                let b = &p.rendered;
                let c = cx(&s.set, &b.operation, &b.block);
                let parsed: Vec<GroundStep> = b.update_statements.iter().map(|u| parse_update(&c, u)).collect();
                let want = s
                    .verdict
                    .block(&b.operation, &b.block)
                    .and_then(|v| v.order.clone())
                    .unwrap_or_else(|| c.spec.steps.clone());
                assert_eq!(parsed, want, "{}", p.anchor);
            }
        }
    }
}

#[test]
fn rcu_call_sites() {
    let s = synth("internal_bst");
    assert_eq!(s.verdict.strategy, Strategy::Rcu);
    for f in &s.files {
        let text = &f.code.text;
        assert_eq!(text.matches("rcu_read_lock();").count(), 1);
        assert_eq!(text.matches("rcu_read_unlock();").count(), 1);
        assert_eq!(text.matches("rcu_synchronize();").count(), f.code.provenance.len());
        for p in &f.code.provenance {
            let lines = p.rendered.lines();
            let at = lines.iter().position(|l| l == "rcu_synchronize();").unwrap();
            assert_eq!(lines[at + 1], p.rendered.update_statements[0]);
        }
    }
}

#[test]
fn rcu_render_preconditions() {
    let s = synth("internal_bst");
    let t = &s.set.templates[0].template;
    let blocks: Vec<_> = s.files[0].code.provenance.iter().map(|p| p.rendered.clone()).collect();
    let e = render_rcu(t, &blocks, &s.set.mappings, Strategy::FineGrained).unwrap_err();
    assert!(matches!(e, CodegenError::WrongStrategy { .. }));
    let bare = parse_template("void f(){\n  @@insert::block1\n}\n").unwrap();
    let e = render_rcu(&bare, &blocks, &s.set.mappings, Strategy::Rcu).unwrap_err();
    assert_eq!(e, CodegenError::MissingTraversalMarkers);
}
