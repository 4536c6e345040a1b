mod common;

use common::{random_instance, score_map};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repgen::decoder::*;
use repgen::seq2seq::TableModel;

#[test]
fn length_penalty_examples() {
    assert_eq!(length_penalty(7, 0.0), 1.0);
    assert_eq!(length_penalty(1, 0.7), 1.0);
    assert!((length_penalty(13, 0.2) - 3f64.powf(0.2)).abs() < 1e-9);
    assert!((length_penalty(13, 0.2) - 1.24573).abs() < 1e-5);
}

#[test]
fn coverage_examples() {
    let unit = vec![vec![0.5, 0.25], vec![0.5, 0.75]];
    assert_eq!(coverage_penalty(&unit, 0.2, 1e-6).value, 0.0);
    assert_eq!(coverage_penalty(&unit, 0.0, 1e-6).value, 0.0);

    let cancel = vec![vec![1.0, 0.25], vec![1.0, 0.25]];
    let c = coverage_penalty(&cancel, 0.2, 1e-6);
    assert!(c.value.abs() < 1e-12);
    assert!(!c.floored);
    let clipped = clipped_coverage_penalty(&cancel, 0.2, 1e-6);
    assert!((clipped - 0.2 * 0.5f64.ln()).abs() < 1e-12);
    assert!(c.value > clipped);

    let starved = vec![vec![1.0, 0.0]];
    let c = coverage_penalty(&starved, 0.2, 1e-6);
    assert!(c.floored);
    assert!((c.value - 0.2 * 1e-6f64.ln()).abs() < 1e-12);
}

#[test]
fn repeat_term_examples() {
    let map = score_map(&[(1, 0.5), (2, 0.25), (3, 0.25)]);
    assert!(repeat_term(&[1, 2, 3], &map, 1e-6).abs() < 1e-12);
    assert!((repeat_term(&[4, 5], &map, 1e-6) - 1e-6f64.ln()).abs() < 1e-12);
    assert!((repeat_term(&[4, 5], &map, 1e-6) + 13.8155).abs() < 1e-4);
    let map = score_map(&[(7, 0.5)]);
    assert!(repeat_term(&[7, 7], &map, 1e-6).abs() < 1e-12);
}

#[test]
fn ablation_names() {
    assert_eq!(Ablation::from_name("RSM"), Some(Ablation::default()));
    assert_eq!(Ablation::from_name("w/o-cp"), Some(Ablation { lp: true, cp: false, rs: true }));
    assert_eq!(Ablation::from_name("none"), Some(Ablation::NONE));
    assert_eq!(Ablation::from_name("w/o-everything"), None);
}

#[test]
fn all_terms_disabled_gives_log_prob() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = random_instance(&mut rng);
    let params = RsmParams { ablation: Ablation::NONE, beam_size: 3125, ..Default::default() };
    for h in beam_search(&inst.model, &inst.source, &inst.map, &params).unwrap() {
        assert_eq!(h.final_score, Some(h.log_prob));
        assert_eq!(rsm_score(&h, &inst.map, &params), h.log_prob);
    }
}

#[test]
fn invalid_params() {
    let m = TableModel::new(2, 0, 2);
    for p in [
        RsmParams { beam_size: 0, ..Default::default() },
        RsmParams { max_length: Some(0), ..Default::default() },
        RsmParams { alpha: -1.0, ..Default::default() },
        RsmParams { rs_floor: 0.0, ..Default::default() },
    ] {
        assert!(beam_search(&m, &[1], &score_map(&[]), &p).is_err());
    }
}

#[test]
fn hypotheses_respect_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let params = RsmParams { max_length: Some(inst.max_len), ..Default::default() };
        let ranked = beam_search(&inst.model, &inst.source, &inst.map, &params).unwrap();
        assert!(!ranked.is_empty());
        for w in ranked.windows(2) {
            assert!(w[0].final_score.unwrap() >= w[1].final_score.unwrap() - TIE_TOLERANCE);
        }
        for h in &ranked {
            assert!(h.finished && h.log_prob <= 0.0);
            assert_eq!(h.attention.len(), h.tokens.len());
            assert!(h.tokens.len() <= inst.max_len);
        }
    }
}

#[test]
fn default_max_length_is_capped() {
    let p = RsmParams::default();
    assert_eq!(p.max_length_for(3, 100), 11);
    assert_eq!(p.max_length_for(30, 20), 20);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lp_strictly_increases(n in 1usize..200, alpha in 0.01..2.0f64) {
        prop_assert!(length_penalty(n + 1, alpha) > length_penalty(n, alpha));
        prop_assert_eq!(length_penalty(n, 0.0), 1.0);
    }

    #[test]
    fn rs_strictly_increases(
        scores in prop::collection::vec(0.01..=1.0f64, 1..6),
        response in prop::collection::vec(0u32..10, 1..8),
        pick in any::<prop::sample::Index>(),
    ) {
        let pairs: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect();
        let map = score_map(&pairs);
        let mut longer = response.clone();
        longer.push(pick.index(scores.len()) as u32);
        prop_assert!(repeat_term(&longer, &map, 1e-9) > repeat_term(&response, &map, 1e-9));
    }

    #[test]
    fn cp_exceeds_clipped_when_mass_exceeds_one(
        rows in prop::collection::vec(prop::collection::vec(0.05..1.0f64, 3), 2..5),
        beta in 0.01..1.0f64,
    ) {
        let unclipped = coverage_penalty(&rows, beta, 1e-6).value;
        let clipped = clipped_coverage_penalty(&rows, beta, 1e-6);
        prop_assert!(unclipped >= clipped);
        let over = (0..3).any(|i| rows.iter().map(|r| r[i]).sum::<f64>() > 1.0);
        if over {
            prop_assert!(unclipped > clipped);
        }
    }

    #[test]
    fn neutral_terms_change_nothing(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = RsmParams { alpha: 0.0, beta: 0.0, beam_size: 3125, max_length: Some(inst.max_len), ablation: Ablation { lp: false, cp: false, rs: true }, ..Default::default() };
        let on = RsmParams { ablation: Ablation::default(), ..base.clone() };
        let a = beam_search(&inst.model, &inst.source, &inst.map, &base).unwrap();
        let b = beam_search(&inst.model, &inst.source, &inst.map, &on).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.tokens, &y.tokens);
            prop_assert_eq!(x.final_score.unwrap().to_bits(), y.final_score.unwrap().to_bits());
        }
    }

    #[test]
    fn beam_matches_oracle(seed in any::<u64>(), which in 0usize..5) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let ablation = [
            Ablation::default(),
            Ablation::from_name("w/o-lp").unwrap(),
            Ablation::from_name("w/o-cp").unwrap(),
            Ablation::from_name("w/o-rs").unwrap(),
            Ablation::NONE,
        ][which];
        let params = RsmParams {
            beam_size: inst.k.pow(inst.max_len as u32),
            max_length: Some(inst.max_len),
            ablation,
            ..Default::default()
        };
        let beam = beam_search(&inst.model, &inst.source, &inst.map, &params).unwrap();
        let best = brute_force_best(&inst.model, &inst.source, &inst.map, &params).unwrap();
        prop_assert_eq!(&beam[0].tokens, &best.tokens);
    }

    #[test]
    fn search_is_deterministic(seed in any::<u64>(), per_step in any::<bool>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let params = RsmParams { beam_size: 2, max_length: Some(inst.max_len), per_step, ..Default::default() };
        let a = beam_search(&inst.model, &inst.source, &inst.map, &params).unwrap();
        let b = beam_search(&inst.model, &inst.source, &inst.map, &params).unwrap();
        prop_assert_eq!(a, b);
    }
}
