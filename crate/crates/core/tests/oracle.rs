mod common;

use geometre::dataset::{brute_force_answers, Closure, Graph, Triple};
use geometre::query::{QueryDag, QueryType};

#[test]
fn hand_fixtures_cover_every_type() {
    let types: Vec<QueryType> = common::hand_fixtures().iter().map(|(q, _)| q.query_type()).collect();
    assert_eq!(types, QueryType::ALL.to_vec());
}

#[test]
fn oracle_matches_hand_enumeration() {
    assert_eq!(common::hand_fixture_mismatches(), Vec::<QueryType>::new());
}

#[test]
fn negation_rewrite_answers_are_supersets() {
    let rep = common::negation_superset_report(20, 100);
    assert_eq!(rep.violations, 0, "{rep:?}");
    assert!(rep.strict > 0, "the rewrite should be a strict relaxation somewhere");
}

#[test]
fn closure_adds_implied_answers_only_for_transitive_relations() {
    let mut rels = common::plain_relations(2);
    rels[0].transitive = true;
    let triples = [Triple::new(0, 0, 1), Triple::new(1, 0, 2), Triple::new(0, 1, 1), Triple::new(1, 1, 2)];
    let g = Graph::from_triples(3, &rels, &triples);
    let q = |rel| QueryDag::build(QueryType::P1, &[common::e(0)], &[vec![common::r(rel)]]).unwrap();
    assert_eq!(brute_force_answers(&g, &q(0), Closure::Raw), common::ids(&[1]));
    assert_eq!(brute_force_answers(&g, &q(0), Closure::TransitiveClosed), common::ids(&[1, 2]));
    assert_eq!(brute_force_answers(&g, &q(1), Closure::TransitiveClosed), common::ids(&[1]));
}
