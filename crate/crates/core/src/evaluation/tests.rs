use super::*;
use crate::countmodel::{Arm, ProportionMode};
use crate::library::CountRecord;
use crate::molgraph::parse_graph;
use crate::predictors::{EmbedConfig, EmbedPredictor, MpnnConfig, MpnnPredictor};
use proptest::prelude::*;

#[test]
fn r_squared_cases() {
    let obs = [1.0, 2.0, 3.0];
    assert_eq!(r_squared(&obs, &obs).unwrap(), 1.0);
    assert_eq!(r_squared(&obs, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert_eq!(r_squared(&obs, &[1.0, 2.0, 4.0]).unwrap(), 0.5);
    assert!(r_squared(&obs, &[3.0, 2.0, 1.0]).unwrap() < 0.0);
    assert!(matches!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), Err(EvalError::DegenerateVariance)));
    assert!(matches!(r_squared(&[2.0], &[1.0]), Err(EvalError::TooFew(1))));
}

/// Fraction of positive/negative pairs ordered correctly, ties one half.
fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

#[test]
fn auc_cases() {
    assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
    assert_eq!(roc_auc(&[0.1, 0.2, 0.9, 0.8], &[true, true, false, false]).unwrap(), 0.0);
    assert_eq!(roc_auc(&[3.0, 2.0, 1.0], &[true, false, true]).unwrap(), 0.5);
    assert!(matches!(roc_auc(&[1.0, 2.0], &[true, true]), Err(EvalError::SingleClass)));
}

#[test]
fn hit_rate_cases() {
    let scores: Vec<f64> = (0..15).map(|i| 15.0 - i as f64).collect();
    let mut labels = vec![false; 15];
    for i in [0, 3, 7, 9, 12] {
        labels[i] = true;
    }
    assert_eq!(hit_rate_at_k(&scores, &labels, 10).unwrap(), 0.4);
    assert_eq!(hit_rate_at_k(&scores, &[true; 15], 7).unwrap(), 1.0);
    let mut tail = vec![false; 15];
    tail[14] = true;
    assert_eq!(hit_rate_at_k(&scores, &tail, 10).unwrap(), 0.0);
    assert!(matches!(hit_rate_at_k(&scores, &labels, 16), Err(EvalError::KTooLarge { k: 16, n: 15 })));
    // ties resolve by input order
    assert_eq!(hit_rate_at_k(&[1.0, 1.0, 1.0], &[false, true, true], 1).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(data in proptest::collection::vec((0i32..6, any::<bool>()), 2..40)) {
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        prop_assert!((roc_auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_to_monotone_transform(data in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 2..40)) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let t: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&t, &labels).unwrap());
    }

    #[test]
    fn hit_rate_invariant_to_rescaling(data in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 10..40), c in 0.1f64..10.0) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        let t: Vec<f64> = scores.iter().map(|s| s * c).collect();
        prop_assert_eq!(hit_rate_at_k(&scores, &labels, 10).unwrap(), hit_rate_at_k(&t, &labels, 10).unwrap());
    }

    #[test]
    fn r_squared_at_most_one(data in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..30)) {
        let o: Vec<f64> = data.iter().map(|d| d.0).collect();
        let p: Vec<f64> = data.iter().map(|d| d.1).collect();
        if let Ok(r) = r_squared(&o, &p) {
            prop_assert!(r <= 1.0);
        }
    }
}

fn molecule(id: &str, graph: &str, binder: bool) -> ExternalMolecule {
    ExternalMolecule { id: id.into(), graph: parse_graph(graph).unwrap(), bb_ids: None, is_binder: binder }
}

#[test]
fn screening_ranks_and_rejects_fragments() {
    let pred = Predictor::Mpnn(MpnnPredictor::new(MpnnConfig::default()));
    let a = "atoms=C,N,O;charges=0,0,0;rings=0,0,0;bonds=0-1:1,1-2:2";
    let b = "atoms=C,C,S,Cl;charges=0,0,0,0;rings=0,0,0,0;bonds=0-1:1,1-2:1,2-3:1";
    let one = screen(&[molecule("m1", a, true)], &pred).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].rank, 1);
    let hits = screen(&[molecule("m1", a, true), molecule("m2", b, false), molecule("m3", a, false)], &pred).unwrap();
    let s1 = hits.iter().find(|h| h.id == "m1").unwrap().score;
    let s3 = hits.iter().find(|h| h.id == "m3").unwrap().score;
    assert_eq!(s1, s3);
    assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    let frag = molecule("f", "atoms=C,*;charges=0,0;rings=0,0;bonds=0-1:1", false);
    assert!(matches!(screen(&[frag], &pred), Err(EvalError::UnassembledGraph(_))));
    assert_eq!(format_ranked(&hits).lines().count(), 3);
}

fn test_examples() -> Vec<TagExample> {
    (0..20)
        .map(|i| TagExample {
            tag_id: format!("t{i}"),
            counts: CountRecord::new(i % 7, i % 3, 10 + i, (i % 2) as f64).unwrap(),
            products: vec![ProductInput { kind: ProductKind::Tri, bb_ids: vec!["a".into()], graph: None }],
            p_lab: vec![0.5],
        })
        .collect()
}

#[test]
fn test_metrics_exclude_the_penalty() {
    let pred = Predictor::Embed(EmbedPredictor::new(EmbedConfig::default(), vec!["a".into()]));
    let base = CountModelParams { arm: Arm::TriOnly, proportion_mode: ProportionMode::LabFixed, ..CountModelParams::default() };
    let exs = test_examples();
    let m0 = evaluate_test_set(&pred, &CountModelParams { gamma: 0.0, ..base.clone() }, &exs).unwrap();
    let m1 = evaluate_test_set(&pred, &CountModelParams { gamma: 1.0, ..base.clone() }, &exs).unwrap();
    assert_eq!(m0, m1);
    assert_eq!(m0, evaluate_test_set(&pred, &base, &exs).unwrap());
    assert!(matches!(evaluate_test_set(&pred, &base, &[]), Err(EvalError::EmptyTestSet)));
}
