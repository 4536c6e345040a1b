mod common;

use std::collections::HashMap;
use std::io::Write;

use common::record;
use proptest::prelude::*;
use repgen::corpus::*;
use repgen::Error;

#[test]
fn load_three_valid_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let recs = vec![
        record("a", "kuma/n ga/p deta/v", &["kuma desuka"]),
        record("b", "ame/n ga/p futta/v", &["ame desuka", "futta n desune"]),
        record("c", "hayaku/r kaeru/v", &["kaeru"]),
    ];
    write_dataset(&path, &recs, None).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(loaded, recs);
}

#[test]
fn missing_references_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{}", record_to_json(&record("a", "kuma/n", &["kuma"]))).unwrap();
    writeln!(
        f,
        r#"{{"dialogue_id":"b","context":[],"utterance":{{"text":"kuma","tokens":[{{"surface":"kuma","pos":"noun","content":true}}]}}}}"#
    )
    .unwrap();
    drop(f);
    match load_dataset(&path) {
        Err(Error::Validation { line, fields }) => {
            assert_eq!(line, 2);
            assert!(fields.iter().any(|f| f.contains("references")), "{fields:?}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn header_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let recs = vec![record("a", "kuma/n", &["kuma"])];
    write_dataset(&path, &recs, Some(&serde_json::json!({"seed": 1}))).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), recs);
}

#[test]
fn validation_examples() {
    assert!(validate_record(&record("a", "kuma/n ga/p", &["x", "y"])).is_valid());
    let none = validate_record(&record("a", "kuma/n", &[]));
    assert!(none.violations.iter().any(|v| v == "references: empty"), "{none:?}");
    let four = validate_record(&record("a", "kuma/n", &["1", "2", "3", "4"]));
    assert!(four.violations.iter().any(|v| v == "references: >3"), "{four:?}");
    let no_content = validate_record(&record("a", "ga/p desu/x", &["x"]));
    assert!(!no_content.is_valid());
}

#[test]
fn single_reference_always_index_zero() {
    let recs: Vec<_> = (0..50).map(|i| record(&format!("r{i}"), "kuma/n", &["kuma"])).collect();
    for seed in 0..5 {
        assert!(split_for_training(&recs, seed).pairs.iter().all(|(_, i)| *i == 0));
    }
}

#[test]
fn split_is_deterministic_and_uniform() {
    let recs: Vec<_> = (0..10_000)
        .map(|i| record(&format!("r{i}"), "kuma/n", &["a", "b", "c"]))
        .collect();
    assert_eq!(split_for_training(&recs, 3), split_for_training(&recs, 3));
    for seed in [0u64, 1, 2] {
        let view = split_for_training(&recs, seed);
        let mut counts = [0usize; 3];
        for (_, i) in &view.pairs {
            counts[*i] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
        }
    }
}

#[test]
fn stats_hand_counted() {
    let tok = LexiconTokenizer::default();
    let s = compute_stats(&[record("a", "a/n b/n c/n", &["a b"])], &tok);
    assert!((s.word_overlap_rate - 200.0 / 3.0).abs() < 1e-9);
    assert!((s.content_word_overlap_rate - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(s.n_dialogues, 1);
    assert_eq!(s.n_repetitions, 1);
}

#[test]
fn stats_reference_equals_utterance() {
    let recs = vec![
        record("a", "kuma/n ga/p deta/v", &["kuma ga deta"]),
        record("b", "ame/n futta/v yo/o", &["ame futta yo", "ame futta yo"]),
    ];
    let s = compute_stats(&recs, &LexiconTokenizer::default());
    assert_eq!(s.word_overlap_rate, 100.0);
    assert_eq!(s.content_word_overlap_rate, 100.0);
    assert_eq!(s.avg_tokens_utterance, s.avg_tokens_repetition);
}

#[test]
fn stats_percentages_are_bounded() {
    let recs = generate_synthetic(&SyntheticConfig { n_records: 300, ..Default::default() }).unwrap();
    let s = compute_stats(&recs, &LexiconTokenizer::from_records(&recs));
    for v in [s.word_overlap_rate, s.content_word_overlap_rate] {
        assert!((0.0..=100.0).contains(&v));
    }
    let total: f64 = s.pos_table.values().map(|p| p.all_pct).sum();
    assert!(total <= 100.0 + 1e-9);
}

fn single_planted(noise: f64, records: usize, seed: u64) -> Vec<DialogueRecord> {
    let mut planted = std::collections::BTreeMap::new();
    planted.insert("kuma".to_string(), 1.0);
    for w in ["sora", "umi", "yama", "kawa", "mori"] {
        planted.insert(w.to_string(), 0.0);
    }
    generate_synthetic(&SyntheticConfig {
        n_records: records,
        planted_propensity: planted,
        noise_rate: noise,
        template_pool: vec!["<w> desuka".into()],
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn degenerate_propensity_word_is_always_repeated() {
    for r in single_planted(0.0, 300, 4) {
        if r.utterance.iter().any(|t| t.surface == "kuma") {
            for reference in &r.references {
                assert!(split_words(reference).contains(&"kuma".to_string()), "{reference}");
            }
        }
    }
}

#[test]
fn synthetic_is_deterministic() {
    let cfg = SyntheticConfig { n_records: 200, seed: 11, ..Default::default() };
    assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
}

#[test]
fn uniform_pair_is_split_evenly() {
    let mut planted = std::collections::BTreeMap::new();
    planted.insert("kuma".to_string(), 0.5);
    planted.insert("sora".to_string(), 0.5);
    let recs = generate_synthetic(&SyntheticConfig {
        n_records: 1000,
        planted_propensity: planted,
        noise_rate: 0.0,
        template_pool: vec!["<w> desuka".into()],
        references_range: (1, 1),
        utterance_length_range: (6, 8),
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let both: Vec<_> = recs
        .iter()
        .filter(|r| {
            let c: Vec<_> = r.content_words().map(|(_, t)| t.surface.as_str()).collect();
            c.contains(&"kuma") && c.contains(&"sora")
        })
        .collect();
    assert!(both.len() > 300);
    let kuma = both.iter().filter(|r| r.references[0].starts_with("kuma")).count();
    let f = kuma as f64 / both.len() as f64;
    assert!((f - 0.5).abs() <= 0.05, "{f}");
}

#[test]
fn empirical_frequency_matches_sampling_probability() {
    // one slot, weights proportional to rho: P(w chosen) = rho_w / sum rho
    let recs = generate_synthetic(&SyntheticConfig {
        n_records: 4000,
        noise_rate: 0.0,
        template_pool: vec!["<w> desuka".into()],
        references_range: (1, 1),
        vocab_size: 20,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let mut expected: HashMap<String, f64> = HashMap::new();
    let mut observed: HashMap<String, f64> = HashMap::new();
    for r in &recs {
        let prop = r.planted_propensity().unwrap();
        let total: f64 = prop.values().sum();
        let chosen = split_words(&r.references[0])[0].clone();
        for (w, p) in &prop {
            let q = if total > 0.0 { p / total } else { 1.0 / prop.len() as f64 };
            *expected.entry(w.clone()).or_default() += q;
            if *w == chosen {
                *observed.entry(w.clone()).or_default() += 1.0;
            }
        }
    }
    for (w, e) in &expected {
        let o = observed.get(w).copied().unwrap_or(0.0);
        // Poisson-binomial variance is at most the mean
        let se = e.sqrt().max(1.0);
        assert!((o - e).abs() <= 3.0 * se + 1.0, "{w}: observed {o}, expected {e:.1}");
    }
}

fn arb_pos() -> impl Strategy<Value = Pos> {
    prop::sample::select(Pos::ALL.to_vec())
}

fn arb_record() -> impl Strategy<Value = DialogueRecord> {
    (
        "[a-z]{1,6}",
        prop::collection::vec(("[a-z]{1,5}", arb_pos()), 1..8),
        prop::collection::vec("[a-z][a-z ]{0,11}", 1..=3),
        prop::collection::vec("[a-z ]{0,10}", 0..3),
    )
        .prop_map(|(id, words, refs, context)| {
            let mut utterance: Vec<Token> = words.into_iter().map(|(s, p)| Token::new(s, p)).collect();
            utterance[0] = Token::new(utterance[0].surface.clone(), Pos::Noun);
            DialogueRecord { dialogue_id: id, context, utterance, references: refs, meta: Default::default() }
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn write_then_load_roundtrips(recs in prop::collection::vec(arb_record(), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        write_dataset(&path, &recs, None).unwrap();
        prop_assert_eq!(load_dataset(&path).unwrap(), recs);
    }

    #[test]
    fn split_is_a_pure_function(recs in prop::collection::vec(arb_record(), 1..10), seed in any::<u64>()) {
        let a = split_for_training(&recs, seed);
        prop_assert_eq!(&a, &split_for_training(&recs, seed));
        for (r, i) in &a.pairs {
            prop_assert!(*i < r.references.len());
        }
    }

    #[test]
    fn is_content_tracks_pos(pos in arb_pos()) {
        let t = Token::new("w", pos);
        prop_assert_eq!(t.is_content, matches!(pos, Pos::Noun | Pos::Verb | Pos::Adjective | Pos::Adverb));
    }
}
