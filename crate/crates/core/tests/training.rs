mod common;

use geometre::query::QueryType;
use geometre::trainer::{train, TrainingConfig};

#[test]
fn loss_falls_on_the_transitive_fixture() {
    let ds = common::transitive_fixture();
    let cfg = TrainingConfig { gamma: 4.0, learning_rate: 0.02, ..common::transitive_training_config(2000, true) };
    let out = train(&ds, &cfg, None).unwrap();
    let (first, last) = (out.initial_loss.unwrap(), out.final_loss.unwrap());
    assert!(last < 0.3 * first, "{first} -> {last}");
}

#[test]
fn training_is_deterministic() {
    let ds = common::transitive_fixture();
    let cfg = common::transitive_training_config(150, true);
    let a = train(&ds, &cfg, None).unwrap();
    let b = train(&ds, &cfg, None).unwrap();
    assert_eq!(a.store, b.store);
    assert_eq!(a.final_loss, b.final_loss);
}

#[test]
fn chains_are_ordered_along_the_transitive_dimension() {
    let rep = common::transitive_inference(5000);
    assert!(rep.ordered * 10 >= rep.chains * 9, "{rep:?}");
}

#[test]
fn transitive_loss_orders_chains() {
    let (on, off, _) = common::chain_spearman_pair(3000);
    assert!(on >= 0.9 && on > off, "on {on}, off {off}");
}

#[test]
fn trained_model_beats_random_ranking() {
    let (_, report, again) = common::sanity_run();
    assert_eq!(report, again);
    for ty in [QueryType::P1, QueryType::I2, QueryType::I3] {
        let m = &report.per_type[&ty];
        assert!(m.mrr >= 5.0 * m.baseline, "{ty}: {} vs baseline {}", m.mrr, m.baseline);
    }
}
