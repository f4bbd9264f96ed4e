use proptest::prelude::*;

use qrank::dataset::{parse_ranking_str, split_tail, write_ranking_string};
use qrank::metrics::{average_precision, evaluate_run, rank_by_score, Metric};
use qrank::model::{train, RankerConfig, RankerKind, Scorer};
use qrank::pairwise::{dataset_pairwise_accuracy, generate_pairs, pairwise_accuracy};
use qrank::ranknet::cross_entropy;
use qrank::synthgen::{generate, GenSpec, Scenario};
use qrank::{Candidate, Dataset, QueryGroup, RankedList};

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..5, 1usize..6).prop_flat_map(|(queries, dim)| {
        proptest::collection::vec(
            proptest::collection::vec((0u32..3, proptest::collection::vec(-1e3f64..1e3, dim)), 1..6),
            queries,
        )
        .prop_map(|groups| {
            Dataset::new(
                groups
                    .into_iter()
                    .enumerate()
                    .map(|(i, rows)| {
                        let qid = i as u64 + 1;
                        QueryGroup {
                            qid,
                            candidates: rows
                                .into_iter()
                                .map(|(label, features)| Candidate { label, qid, features, comment: None })
                                .collect(),
                        }
                    })
                    .collect(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn ranking_files_round_trip(ds in arb_dataset()) {
        let text = write_ranking_string(&ds).unwrap();
        let back = parse_ranking_str(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(write_ranking_string(&back).unwrap(), text);
    }

    #[test]
    fn metrics_stay_in_unit_interval(ds in arb_dataset(), seed in 0u64..1000) {
        let scores: Vec<Vec<f64>> = ds
            .groups()
            .iter()
            .map(|g| (0..g.len()).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64).collect())
            .collect();
        let report = evaluate_run(&ds, &scores).unwrap();
        for m in Metric::ALL {
            let v = report.get(m);
            prop_assert!((0.0..=1.0).contains(&v), "{} = {}", m, v);
        }
    }

    #[test]
    fn ideal_order_maximises_ap(labels in proptest::collection::vec(0u32..3, 1..9), scores in proptest::collection::vec(-5f64..5.0, 9)) {
        let g = QueryGroup {
            qid: 1,
            candidates: labels.iter().map(|&label| Candidate { label, qid: 1, features: vec![0.0], comment: None }).collect(),
        };
        let ap = average_precision(&rank_by_score(&g, &scores[..labels.len()]).unwrap());
        let mut ideal = labels.clone();
        ideal.sort_by(|a, b| b.cmp(a));
        prop_assert!(ap <= average_precision(&RankedList::from_labels(1, &ideal)) + 1e-15);
    }

    #[test]
    fn reversed_scores_complement_accuracy(labels in proptest::collection::vec(0u32..3, 2..10)) {
        let g = QueryGroup {
            qid: 1,
            candidates: labels.iter().map(|&label| Candidate { label, qid: 1, features: vec![0.0], comment: None }).collect(),
        };
        let pairs = generate_pairs(&g);
        prop_assume!(!pairs.is_empty());
        let s: Vec<f64> = (0..labels.len()).map(|i| (i * 7 % 11) as f64 + i as f64 * 1e-3).collect();
        let r: Vec<f64> = s.iter().map(|x| -x).collect();
        let a = pairwise_accuracy(&s, &pairs).unwrap();
        let b = pairwise_accuracy(&r, &pairs).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_is_antisymmetric(delta in -50f64..50.0, p in 0f64..=1.0) {
        prop_assert!(cross_entropy(delta, p) >= 0.0);
        prop_assert!((cross_entropy(delta, p) - cross_entropy(-delta, 1.0 - p)).abs() < 1e-9);
    }
}

#[test]
fn every_ranker_beats_chance_on_linear_data() {
    let (ds, _) = generate(&GenSpec { queries: 40, dim: 6, seed: 21, ..GenSpec::default() }).unwrap();
    let (tr, ev) = split_tail(&ds, 10).unwrap();
    for kind in RankerKind::ALL {
        let cfg = match RankerConfig::defaults(kind, tr.dim(), 7, true) {
            RankerConfig::RankNet(mut c) => {
                c.lr = 0.01;
                c.epochs = 20;
                RankerConfig::RankNet(c)
            }
            other => other,
        };
        let model = train(&tr, &cfg).unwrap().model;
        let acc = dataset_pairwise_accuracy(&ev, &model.score_dataset(&ev).unwrap()).unwrap();
        assert!(acc > 0.7, "{kind}: {acc}");
        assert!(model.score(&[0.0; 3]).is_err());
    }
}

#[test]
fn noise_scenario_has_no_signal_for_the_oracle() {
    let (ds, gt) = generate(&GenSpec { queries: 5, dim: 3, scenario: Scenario::Noise, ..GenSpec::default() }).unwrap();
    assert!(gt.oracle_scores(&ds).iter().flatten().all(|&s| s == 0.0));
}
