mod support;

use support::props;

#[test]
fn fixpoint_is_idempotent() {
    props::fixpoint_is_idempotent(100).unwrap();
}

#[test]
fn positive_fixpoint_is_monotone() {
    props::positive_fixpoint_is_monotone(100).unwrap();
}

#[test]
fn reachability_matches_search() {
    props::reachability_matches_search(100).unwrap();
}

#[test]
fn inertia_frame() {
    props::inertia_frame(100).unwrap();
}

#[test]
fn key_order_cycles_are_detected() {
    props::key_order_cycles_are_detected(200).unwrap();
}
