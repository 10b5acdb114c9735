use std::sync::LazyLock;

use proptest::prelude::*;
use stylenet_core::analysis::{adjusted_rand_index, bookkeeping_modularity, louvain, modularity, Partition};
use stylenet_core::article_sim::{edit_similarity, levenshtein, overlap_coefficient};
use stylenet_core::corpus::{Article, Segmenter, SentenceRecord};
use stylenet_core::matching::{MatchParams, PairwiseScores, ScoredSentence};
use stylenet_core::networks::WeightedNetwork;
use stylenet_core::providers::sentiment::sentiment;
use stylenet_core::providers::{Embedding, EmbeddingProvider, Lexicon, SentimentScore, ToyProvider};
use stylenet_core::sweep::network_distance;

static LEXICON: LazyLock<Lexicon> = LazyLock::new(Lexicon::vader);
static SEGMENTER: LazyLock<Segmenter> = LazyLock::new(Segmenter::with_defaults);

fn symbols() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..6, 0..12)
}

fn network(n: usize, weights: &[f64]) -> WeightedNetwork {
    let mut g = WeightedNetwork::from_ids((0..n).map(|i| format!("n{i}"))).unwrap();
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            g.set_weight(i, j, weights[k]).unwrap();
            k += 1;
        }
    }
    g
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], n * (n - 1) / 2)
}

proptest! {
    #[test]
    fn levenshtein_is_a_metric(a in symbols(), b in symbols(), c in symbols()) {
        let d = |x: &[usize], y: &[usize]| levenshtein(x, y);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) >= a.len().abs_diff(b.len()));
        prop_assert!(d(&a, &b) <= a.len().max(b.len()));
    }

    #[test]
    fn article_similarities_bounded_and_symmetric(a in symbols(), b in symbols()) {
        for f in [edit_similarity, overlap_coefficient] {
            let s = f(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, f(&b, &a));
        }
        if !a.is_empty() {
            prop_assert_eq!(edit_similarity(&a, &a), 1.0);
            prop_assert_eq!(overlap_coefficient(&a, &a), 1.0);
        }
    }

    #[test]
    fn compound_sentiment_in_range(text in "[a-zA-Z !?'\"]{0,80}") {
        let s = sentiment(&text, &LEXICON).unwrap().compound();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn sentiment_of_known_words_in_range(words in prop::collection::vec(
        prop::sample::select(vec!["good", "bad", "GREAT", "not", "never", "horrible", "love", "hate", "!", "the", "\"awful\""]),
        0..25,
    )) {
        let s = sentiment(&words.join(" "), &LEXICON).unwrap().compound();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn embedding_is_batch_invariant(texts in prop::collection::vec("[a-z ]{1,30}", 1..8), split in 0usize..8) {
        let texts: Vec<String> = texts.into_iter().filter(|t| !t.is_empty()).collect();
        prop_assume!(!texts.is_empty());
        let p = ToyProvider::new(32, 1);
        let whole = p.embed_batch(&texts).unwrap();
        let cut = split.min(texts.len());
        let mut parts = p.embed_batch(&texts[..cut]).unwrap();
        parts.extend(p.embed_batch(&texts[cut..]).unwrap());
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn matching_is_monotone_in_tau1(
        vectors in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..8),
        sentiments in prop::collection::vec(-1.0f64..1.0, 8),
        lo in 0.05f64..0.95,
        gap in 0.0f64..0.5,
        tau2 in 0.05f64..1.0,
    ) {
        let sentences: Vec<ScoredSentence> = vectors
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                Some(ScoredSentence {
                    record: SentenceRecord { article_id: "a".into(), index: i, text: "t".into() },
                    embedding: Embedding::new(v.clone()).ok()?,
                    sentiment: SentimentScore::new(sentiments[i]).unwrap(),
                })
            })
            .collect();
        prop_assume!(sentences.len() >= 2);
        let hi = (lo + gap).min(0.99);
        let scores = PairwiseScores::compute(&sentences).unwrap();
        let low = MatchParams::new(lo, tau2).unwrap();
        let high = MatchParams::new(hi, tau2).unwrap();
        let n = scores.len();
        for i in 0..n {
            for j in 0..n {
                if i != j && scores.similarity(i, j, &high) > 0.0 {
                    prop_assert!(scores.similarity(i, j, &low) > 0.0);
                }
            }
        }
        // Raising tau1 can only split symbol classes.
        prop_assert!(scores.symbol_table(&high).unwrap().len() >= scores.symbol_table(&low).unwrap().len());
    }

    #[test]
    fn network_distance_is_a_pseudo_metric(
        n in 2usize..7,
        seeds in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 21), 3),
    ) {
        let m = n * (n - 1) / 2;
        let [a, b, c] = [0, 1, 2].map(|k| network(n, &seeds[k][..m]));
        let d = |x: &WeightedNetwork, y: &WeightedNetwork| network_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &b) >= 0.0);
    }

    #[test]
    fn modularity_paths_agree(w in weights(6), labels in prop::collection::vec(0usize..3, 6)) {
        let g = network(6, &w);
        prop_assume!(g.total_weight() > 0.0);
        let p = Partition::from_labels((0..6).map(|i| format!("n{i}")), labels).unwrap();
        let q = modularity(&g, &p, 1.0).unwrap();
        prop_assert!((q - bookkeeping_modularity(&g, &p, 1.0).unwrap()).abs() < 1e-9);
        prop_assert!((-0.5 - 1e-12..=1.0).contains(&q));
    }

    #[test]
    fn louvain_covers_every_node_and_is_deterministic(w in weights(7), seed in 0u64..4) {
        let g = network(7, &w);
        let p = louvain(&g, 1.0, seed);
        prop_assert_eq!(p.len(), 7);
        prop_assert_eq!(p.clone(), louvain(&g, 1.0, seed));
        if g.total_weight() > 0.0 {
            // Never worse than lumping everything together.
            prop_assert!(modularity(&g, &p, 1.0).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn ari_symmetric_and_bounded(a in prop::collection::vec(0usize..4, 2..20), shift in 0usize..4) {
        let ids: Vec<String> = (0..a.len()).map(|i| i.to_string()).collect();
        let b: Vec<usize> = a.iter().enumerate().map(|(i, x)| (x + i * shift) % 3).collect();
        let pa = Partition::from_labels(ids.clone(), a.clone()).unwrap();
        let pb = Partition::from_labels(ids.clone(), b).unwrap();
        let x = adjusted_rand_index(&pa, &pb).unwrap();
        prop_assert_eq!(x, adjusted_rand_index(&pb, &pa).unwrap());
        prop_assert!(x <= 1.0);
        // Relabeling clusters does not change anything.
        let relabeled = Partition::from_labels(ids, a.iter().map(|x| 10 - x)).unwrap();
        prop_assert_eq!(adjusted_rand_index(&pa, &relabeled).unwrap(), 1.0);
    }

    #[test]
    fn segmentation_is_well_formed(title in "[A-Z][a-z ]{0,20}", body in "[A-Za-z .!?]{0,200}") {
        let article = Article {
            id: "a".into(),
            domain: "d".into(),
            event_id: "e".into(),
            title: title.clone(),
            body,
            bias_label: None,
            url: None,
        };
        let records = SEGMENTER.segment(&article);
        for (k, r) in records.iter().enumerate() {
            prop_assert_eq!(r.index, k);
            prop_assert_eq!(&r.article_id, "a");
            prop_assert!(!r.text.is_empty());
            prop_assert_eq!(r.text.trim(), r.text.as_str());
            prop_assert!(!r.text.contains("  "));
        }
        if !title.trim().is_empty() {
            prop_assert_eq!(records[0].text.as_str(), title.split_whitespace().collect::<Vec<_>>().join(" "));
        }
    }
}
