mod common;

use proptest::prelude::*;
use zscomp::composition::SpaceOptions;
use zscomp::inference::{Evidence, Method};
use zscomp::oracle::{check_against_engine, oracle_pipeline, OracleConfig};
use zscomp::pipeline::{Engine, EngineParams};
use zscomp::probability::ProbabilityMatrix;

fn engine(inst: &common::Instance, params: EngineParams, options: SpaceOptions) -> Engine {
    let mut e = Engine::new(
        inst.actions.clone(),
        Some(inst.objects.clone()),
        Some(inst.scenes.clone()),
        params,
    )
    .unwrap();
    e.build_space(options, None).unwrap();
    e
}

fn small_params() -> EngineParams {
    EngineParams {
        k_objects: 4,
        k_scenes: 3,
        k_concatenation: 6,
        k_compositions: 12,
        ..EngineParams::default()
    }
}

#[test]
fn every_method_matches_the_oracle_on_the_reference_size() {
    let inst = common::random_instance(31, 20, 15, 10, 50, 16);
    let e = engine(&inst, small_params(), SpaceOptions::default());
    let r = check_against_engine(&e, &inst.evidence(), &Method::ALL, SpaceOptions::default(), 1e-5).unwrap();
    assert!(r.passed(), "{:?}", r.mismatches);
    assert_eq!(r.score_checks, 7 * 50 * 10);
}

#[test]
fn space_options_and_clipping_match_the_oracle() {
    let inst = common::random_instance(32, 12, 9, 6, 20, 8);
    let params = EngineParams {
        clip_similarities: true,
        ..small_params()
    };
    for options in [
        SpaceOptions {
            normalize_before_sum: true,
            exclude_self_pairs: false,
        },
        SpaceOptions {
            normalize_before_sum: false,
            exclude_self_pairs: true,
        },
    ] {
        let e = engine(&inst, params, options);
        let r = check_against_engine(&e, &inst.evidence(), &Method::ALL, options, 1e-5).unwrap();
        assert!(r.passed(), "{options:?}: {:?}", r.mismatches);
    }
}

#[test]
fn plain_selection_matches_the_oracle() {
    let inst = common::random_instance(33, 10, 10, 5, 15, 6);
    let params = EngineParams {
        diversify: false,
        ..small_params()
    };
    let e = engine(&inst, params, SpaceOptions::default());
    let r = check_against_engine(&e, &inst.evidence(), &Method::ALL, SpaceOptions::default(), 1e-5).unwrap();
    assert!(r.passed(), "{:?}", r.mismatches);
}

#[test]
fn oracle_refuses_oversized_spaces() {
    let inst = common::random_instance(34, 400, 300, 1, 1, 2);
    let cfg = OracleConfig::new(small_params(), SpaceOptions::default());
    let err = oracle_pipeline(
        &inst.actions,
        Some(&inst.objects),
        Some(&inst.scenes),
        &inst.evidence(),
        Method::Compositions,
        &cfg,
    )
    .unwrap_err();
    assert!(matches!(err, zscomp::error::Error::TooLarge { .. }));
}

fn permuted(m: &ProbabilityMatrix, order: &[usize]) -> ProbabilityMatrix {
    m.select_videos(order)
}

#[test]
fn permuting_videos_permutes_score_rows() {
    let inst = common::random_instance(35, 8, 6, 4, 12, 5);
    let e = engine(&inst, small_params(), SpaceOptions::default());
    let order: Vec<usize> = (0..12).rev().collect();
    let po = permuted(&inst.object_probs, &order);
    let ps = permuted(&inst.scene_probs, &order);
    for method in Method::ALL {
        let a = e.classify(method, &inst.evidence(), None).unwrap();
        let b = e
            .classify(
                method,
                &Evidence {
                    objects: Some(&po),
                    scenes: Some(&ps),
                },
                None,
            )
            .unwrap();
        for (i, &src) in order.iter().enumerate() {
            assert_eq!(a.scores.row(src), b.scores.row(i), "{method}");
        }
    }
}

#[test]
fn restricting_actions_keeps_their_scores() {
    let inst = common::random_instance(36, 8, 6, 7, 10, 5);
    let e = engine(&inst, small_params(), SpaceOptions::default());
    let full = e.classify(Method::Compositions, &inst.evidence(), None).unwrap();
    let subset = [1usize, 4, 6];
    let part = e.classify(Method::Compositions, &inst.evidence(), Some(&subset)).unwrap();
    for v in 0..10 {
        for (col, &a) in subset.iter().enumerate() {
            assert_eq!(part.scores.get(v, col), full.scores.get(v, a));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scores_are_bounded_by_total_similarity(seed in any::<u64>()) {
        let inst = common::random_instance(seed, 6, 5, 3, 8, 4);
        let e = engine(&inst, small_params(), SpaceOptions::default());
        let all = [0usize, 1, 2];
        let zscomp::inference::MethodSupport::Compositions { sets, .. } = e.support(Method::Compositions, &all).unwrap() else {
            unreachable!()
        };
        let c = e.classify(Method::Compositions, &inst.evidence(), None).unwrap();
        for v in 0..8 {
            for (a, set) in sets.iter().enumerate() {
                let bound: f64 = set.members.iter().map(|m| m.similarity.abs()).sum();
                prop_assert!(c.scores.get(v, a).abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn prediction_survives_positive_rescaling(seed in any::<u64>(), factor in 0.01f64..100.0) {
        let inst = common::random_instance(seed, 6, 5, 4, 8, 4);
        let e = engine(&inst, small_params(), SpaceOptions::default());
        for method in Method::ALL {
            let c = e.classify(method, &inst.evidence(), None).unwrap();
            let scaled = zscomp::inference::predict_all(&c.scores.scaled(factor), method).unwrap();
            let ids: Vec<usize> = scaled.iter().map(|p| p.action_id).collect();
            let before: Vec<usize> = c.predictions.iter().map(|p| p.action_id).collect();
            prop_assert_eq!(ids, before);
        }
    }
}
