use std::collections::BTreeMap;

use langflow::corpus::{porter, Document};
use langflow::flow::{incorporation_matrix, Bucketing, FlowData, TimeBucket, Weighting};
use langflow::plda::{init_state, AttributionResult, DocAttribution, LabelSpace};
use langflow::rng;
use langflow::stats::{self, Direction, VerdictOptions};
use proptest::prelude::*;

fn space(labels: usize, k: usize) -> LabelSpace {
    let mut names: Vec<(String, usize)> = (0..labels).map(|l| (format!("L{l}"), k)).collect();
    names.push(("bg".into(), 1));
    LabelSpace::new(names, Some("bg")).unwrap()
}

/// Documents as (label subset mask, tokens).
fn corpus_strategy(labels: usize, vocab: u32) -> impl Strategy<Value = Vec<(u8, Vec<u32>)>> {
    prop::collection::vec((1u8..(1 << labels), prop::collection::vec(0..vocab, 1..20)), 1..12)
}

fn documents(raw: &[(u8, Vec<u32>)], labels: usize) -> Vec<Document> {
    raw.iter()
        .enumerate()
        .map(|(i, (mask, tokens))| {
            let mut names: Vec<String> = (0..labels).filter(|l| mask & (1 << l) != 0).map(|l| format!("L{l}")).collect();
            names.push("bg".into());
            Document {
                id: format!("d{i}"),
                year: 2000,
                tokens: tokens.clone(),
                labels: names,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sweeps_keep_counts_consistent(raw in corpus_strategy(3, 15), k in 1usize..4, seed in any::<u64>()) {
        let docs = documents(&raw, 3);
        let space = space(3, k);
        let mut r = rng::seeded(seed);
        let mut state = init_state(&docs, None, &space, 15, &mut r).unwrap();
        prop_assert!(state.check_consistency().is_ok());
        for _ in 0..3 {
            state.gibbs_sweep(0.1, 0.01, &mut r);
            prop_assert_eq!(state.check_consistency(), Ok(()));
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let mut rngs: Vec<_> = (0..2).map(|i| rng::derived(seed, &["shard", &i.to_string()])).collect();
        state.parallel_sweep(0.1, 0.01, &mut rngs, &pool);
        prop_assert_eq!(state.check_consistency(), Ok(()));

        // Every assignment stays inside the document's own labels.
        for d in 0..state.num_docs() {
            let allowed = state.allowed_labels(d);
            for i in 0..state.doc_len(d) {
                let (label, _) = state.assignment(d, i).unwrap();
                prop_assert!(allowed.contains(&label));
            }
        }
    }

    #[test]
    fn conditional_is_zero_outside_the_label_set(raw in corpus_strategy(3, 10), seed in any::<u64>()) {
        let docs = documents(&raw, 3);
        let space = space(3, 2);
        let mut state = init_state(&docs, None, &space, 10, &mut rng::seeded(seed)).unwrap();
        for d in 0..state.num_docs() {
            let allowed = state.allowed_labels(d);
            state.remove_token(d, 0);
            let weights = state.conditional(d, 0, 0.1, 0.01);
            for (g, w) in weights.iter().enumerate() {
                let (label, _) = space.split(g);
                prop_assert_eq!(*w > 0.0, allowed.contains(&label));
            }
        }
    }

    #[test]
    fn stemming_never_lengthens(word in "[a-z]{1,14}") {
        let s = porter::stem(&word);
        prop_assert!(s.len() <= word.len());
        prop_assert!(!s.is_empty());
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(mut xs in prop::collection::vec(-1e3f64..1e3, 1..60), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let a = stats::quantile(&xs, lo);
        let b = stats::quantile(&xs, hi);
        prop_assert!(a <= b);
        prop_assert!(xs[0] <= a && b <= xs[xs.len() - 1]);
    }

    #[test]
    fn buckets_partition_the_years(first in 1950i32..2000, span in 0i32..40, which in 0usize..4) {
        let last = first + span;
        let scheme = [Bucketing::Whole, Bucketing::Annual, Bucketing::FiveYear, Bucketing::Decade][which].clone();
        let buckets = scheme.buckets(first, last);
        for y in first..=last {
            prop_assert_eq!(buckets.iter().filter(|b| b.contains(y)).count(), 1);
        }
        let round: Bucketing = scheme.to_string().parse().unwrap();
        prop_assert_eq!(round, scheme);
    }

    #[test]
    fn matrix_columns_sum_to_one_and_verdicts_are_antisymmetric(
        shares in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.05f64..1.0, 0u8..3, 20usize..200), 4..30),
        seed in any::<u64>(),
    ) {
        let (attribution, docs) = flow_fixture(&shares);
        let grouping: BTreeMap<String, String> = ["A", "B", "bg"].iter().map(|s| (s.to_string(), s.to_string())).collect();
        let data = FlowData::build(
            &attribution,
            &docs,
            &grouping,
            vec!["A".into(), "B".into(), "bg".into()],
            vec!["A".into(), "B".into()],
        ).unwrap();
        let bucket = TimeBucket::new("all", 2000, 2000);
        for weighting in [Weighting::Tokens, Weighting::Documents] {
            let m = incorporation_matrix(&data, &bucket, weighting);
            for c in 0..2 {
                if m.column_docs[c] > 0 {
                    let sum: f64 = m.cells.iter().map(|row| row[c].unwrap()).sum();
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                } else {
                    prop_assert!(m.cells.iter().all(|row| row[c].is_none()));
                }
            }
        }
        let opts = VerdictOptions { resamples: 60, seed, weighting: Weighting::Tokens };
        let ab = stats::pair_verdict(&data, "A", "B", &bucket, &opts).unwrap();
        let ba = stats::pair_verdict(&data, "B", "A", &bucket, &opts).unwrap();
        prop_assert_eq!(ab.swapped(), ba.clone());
        let flipped = match ab.direction {
            Direction::AExports => Direction::BExports,
            Direction::BExports => Direction::AExports,
            Direction::Indistinguishable => Direction::Indistinguishable,
        };
        prop_assert_eq!(ba.direction, flipped);
    }
}

/// Documents in A, B or both, with shares (a, b, bg) normalized.
fn flow_fixture(rows: &[(f64, f64, f64, u8, usize)]) -> (AttributionResult, Vec<Document>) {
    let mut attributions = Vec::new();
    let mut docs = Vec::new();
    for (i, &(a, b, bg, membership, tokens)) in rows.iter().enumerate() {
        let total = a + b + bg;
        attributions.push(DocAttribution {
            id: format!("d{i}"),
            year: 2000,
            tokens,
            psi: vec![(0, a / total), (1, b / total), (2, bg / total)],
            theta: vec![],
            token_labels: None,
        });
        let mut labels: Vec<String> = match membership {
            0 => vec!["A".into()],
            1 => vec!["B".into()],
            _ => vec!["A".into(), "B".into()],
        };
        labels.push("bg".into());
        docs.push(Document {
            id: format!("d{i}"),
            year: 2000,
            tokens: vec![],
            labels,
        });
    }
    let attribution = AttributionResult {
        labels: vec!["A".into(), "B".into(), "bg".into()],
        background: Some(2),
        documents: attributions,
        skipped: vec![],
    };
    (attribution, docs)
}
