use bottomk::confidence::{ws_bounds_subpop, ws_bounds_subpop_with_total, ws_bounds_total};
use bottomk::estimators::{rc_adjusted_weights, sc_adjusted_weights_exact};
use bottomk::simulation::{run_experiments, Distribution, Experiment, ExperimentConfig, GroupSize, SimBound, SimEstimator};
use bottomk::{
    build_bottom_k, deserialize_sketch, read_items_csv, seeded_rng, serialize_sketch, BoundMethod, Error, Predicate,
    RankFamily, Sketch,
};

const CSV: &str = "id,weight,attr:site\n\
a,3.5,east\nb,1.25,west\nc,7,east\nd,0.5,west\ne,2,east\nf,9.75,west\ng,4,east\nh,1,west\n";

#[test]
fn csv_to_sketch_to_json_and_back() {
    let items = read_items_csv(CSV.as_bytes(), "inline").unwrap();
    let sk = build_bottom_k(&items, 4, RankFamily::Ws, &mut seeded_rng(5, 0)).unwrap();
    let text = serialize_sketch(&Sketch::BottomK(sk.clone()));
    let Sketch::BottomK(back) = deserialize_sketch(&text).unwrap() else {
        panic!("kind changed")
    };
    assert_eq!(back, sk);
    let east = Predicate::parse("site == east").unwrap();
    let a = rc_adjusted_weights(&sk).unwrap().estimate_subpop(&east).unwrap();
    let b = rc_adjusted_weights(&back).unwrap().estimate_subpop(&east).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn sc_splits_the_total_between_complementary_predicates() {
    let items = read_items_csv(CSV.as_bytes(), "inline").unwrap();
    let total: f64 = items.iter().map(|i| i.weight).sum();
    let sk = build_bottom_k(&items, 3, RankFamily::Ws, &mut seeded_rng(8, 0)).unwrap();
    let aw = sc_adjusted_weights_exact(&sk, total).unwrap();
    let east = aw.estimate_subpop(&Predicate::parse("site == east").unwrap()).unwrap();
    let west = aw.estimate_subpop(&Predicate::parse("!(site == east)").unwrap()).unwrap();
    assert!((east + west - total).abs() < 1e-12 * total);
}

#[test]
fn intervals_nest_as_delta_shrinks() {
    let items = read_items_csv(CSV.as_bytes(), "inline").unwrap();
    let sk = build_bottom_k(&items, 5, RankFamily::Ws, &mut seeded_rng(3, 0)).unwrap();
    let east = Predicate::parse("site == east").unwrap();
    for method in [BoundMethod::Normal, BoundMethod::Density] {
        let wide = ws_bounds_total(&sk, 0.01, method, &mut seeded_rng(1, 0)).unwrap();
        let narrow = ws_bounds_total(&sk, 0.2, method, &mut seeded_rng(1, 0)).unwrap();
        assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper, "{method}: {wide:?} {narrow:?}");
    }
    // quantile bounds share their draws when the RNG is reset
    let q = BoundMethod::Quantile { draws: 400 };
    let wide = ws_bounds_subpop(&sk, &east, 0.01, q, &mut seeded_rng(1, 0)).unwrap();
    let narrow = ws_bounds_subpop(&sk, &east, 0.2, q, &mut seeded_rng(1, 0)).unwrap();
    assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
}

#[test]
fn known_total_caps_the_upper_bound() {
    let items = read_items_csv(CSV.as_bytes(), "inline").unwrap();
    let total: f64 = items.iter().map(|i| i.weight).sum();
    let sk = build_bottom_k(&items, 4, RankFamily::Ws, &mut seeded_rng(12, 0)).unwrap();
    let east = Predicate::parse("site == east").unwrap();
    let ci = ws_bounds_subpop_with_total(&sk, &east, total, 0.05, 200, &mut seeded_rng(2, 0)).unwrap();
    let seen: f64 = sk.entries().iter().filter(|e| e.attributes["site"] == "east").map(|e| e.weight).sum();
    let unseen = total - sk.sketch_weight();
    assert!(ci.lower >= seen - 1e-12 && ci.upper <= seen + unseen + 1e-9, "{ci:?}");
}

#[test]
fn pri_sketch_rejected_by_ws_methods() {
    let items = read_items_csv(CSV.as_bytes(), "inline").unwrap();
    let sk = build_bottom_k(&items, 4, RankFamily::Pri, &mut seeded_rng(1, 0)).unwrap();
    assert!(matches!(sc_adjusted_weights_exact(&sk, 30.0), Err(Error::Capability(_))));
    assert!(matches!(
        ws_bounds_total(&sk, 0.05, BoundMethod::Normal, &mut seeded_rng(1, 0)),
        Err(Error::Capability(_))
    ));
}

#[test]
fn small_simulation_is_reproducible_and_complete() {
    let cfg = ExperimentConfig {
        distribution: Distribution::Uniform { n: 60 },
        k_values: vec![5, 10],
        group_sizes: vec![GroupSize::Fixed(6), GroupSize::Whole],
        bound_group_sizes: vec![GroupSize::Fixed(30)],
        repetitions: 12,
        estimators: vec![SimEstimator::WsRc, SimEstimator::WsScExact, SimEstimator::Wsr],
        bounds: vec![SimBound::WsNormal, SimBound::WsW, SimBound::Pri],
        draws: 50,
        experiment: Experiment::Both,
        ..ExperimentConfig::default()
    };
    let a = run_experiments(&cfg).unwrap();
    let b = run_experiments(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    for k in [5, 10] {
        assert!(a.get("ws-rc", k, 6, "sse").is_some());
        assert!(a.get("wsr", k, 60, "sse").is_some());
        assert!(a.get("wsr", k, 6, "sse").is_none());
        for m in ["ws-normal", "ws-w", "pri"] {
            let rate = a.get(m, k, 30, "in_bounds").unwrap();
            assert!((0.0..=1.0).contains(&rate));
        }
    }
    // per-group rows for a 10-group partition
    assert!(a.find("ws-rc", 5, 6, Some(9), "sq_err").is_some());
}
