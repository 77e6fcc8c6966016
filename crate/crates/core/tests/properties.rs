use std::collections::BTreeMap;

use proptest::prelude::*;
use psyc_core::assets::PromptAssets;
use psyc_core::backend::{EmbeddingVector, MockBackend};
use psyc_core::corpus::synth::{generate_synthetic_corpus, SyntheticSpec};
use psyc_core::corpus::{segment, Demographics, Gender, Speaker, Turn, WordSpan};
use psyc_core::ensemble::{aggregate, aggregate_unweighted, classify_segment, AggregatorWeights, SegmentInput, SegmentPrediction};
use psyc_core::evaluation::{cdd, confidence_interval, stratified_kfold, weighted_f1, CddExample};
use psyc_core::pipeline::{Backends, Pipeline};
use psyc_core::retrieval::{KnowledgeChunk, KnowledgeSource, QueryFilter, VectorIndex};
use psyc_core::{AblationFlags, ClassDistribution, ClassLabel, Conflict, Interview, RunConfig};

fn label() -> impl Strategy<Value = ClassLabel> {
    (0usize..5).prop_map(|i| ClassLabel::ALL[i])
}

fn dist() -> impl Strategy<Value = ClassDistribution> {
    prop::array::uniform5(0.001f64..1.0).prop_map(|m| ClassDistribution::normalised(m).unwrap())
}

fn gender() -> impl Strategy<Value = Gender> {
    prop_oneof![Just(Gender::Male), Just(Gender::Female)]
}

fn count_word(text: &str, token: &str) -> usize {
    text.split_whitespace()
        .filter(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).eq_ignore_ascii_case(token))
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_labels_recoverable(seed in any::<u64>(), n in 1usize..40) {
        let spec = SyntheticSpec::default();
        let corpus = generate_synthetic_corpus(seed, n, &spec).unwrap();
        prop_assert_eq!(corpus.len(), n);
        for iv in &corpus {
            let text = iv.full_text();
            for (conflict, signal) in &spec.conflicts {
                let markers = count_word(&text, &signal.marker) as u32;
                let unclear = count_word(&text, signal.unclear_marker.as_deref().unwrap());
                let truth = iv.label(*conflict).unwrap();
                if truth == ClassLabel::NotAssessable {
                    prop_assert!(unclear > 0 && markers == 0);
                } else {
                    prop_assert_eq!(unclear, 0);
                    prop_assert!(signal.ranges[&truth].contains(markers));
                }
            }
        }
    }

    #[test]
    fn mock_home_segment_classification_recovers_labels(seed in any::<u64>()) {
        let spec = SyntheticSpec::default();
        let corpus = generate_synthetic_corpus(seed, 6, &spec).unwrap();
        let mock = MockBackend::new(spec.clone());
        let assets = PromptAssets::builtin();
        let config = RunConfig::default();
        let pipeline = Pipeline::new(Backends { completer: &mock, embedder: &mock }, &assets, &config).unwrap();
        let flags = AblationFlags { few_shot: false, ..AblationFlags::default() };
        for iv in &corpus {
            let summaries = pipeline.summarise_interview(iv).unwrap();
            for (conflict, signal) in &spec.conflicts {
                let home = signal.home_segment.unwrap();
                let input = SegmentInput {
                    interview_id: &iv.id,
                    conflict: *conflict,
                    segment_index: home,
                    summary: Some(&summaries.segments[home]),
                    few_shot: &[],
                    retrieved: &[],
                    flags: &flags,
                    model_tag: "segment",
                };
                let (pred, _) = classify_segment(&mock, &assets, &input).unwrap();
                prop_assert_eq!(pred.distribution.argmax(), iv.label(*conflict).unwrap());
            }
        }
    }
}

proptest! {
    #[test]
    fn segments_partition_words(words in prop::collection::vec("[a-z]{1,6}", 1..300), k in 1usize..9) {
        prop_assume!(words.len() >= k);
        let iv = Interview {
            id: "P".into(),
            turns: vec![Turn::new(Speaker::Interviewee, words.join(" "))],
            demographics: None,
            labels: BTreeMap::new(),
        };
        let segs = segment(&iv, k).unwrap();
        let lens: Vec<usize> = segs.iter().map(|s| s.word_span.len()).collect();
        prop_assert_eq!(lens.iter().sum::<usize>(), words.len());
        prop_assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
        let joined: Vec<&str> = segs.iter().flat_map(|s| s.text.split(' ')).collect();
        prop_assert_eq!(joined, words.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn cdd_antisymmetric_and_bounded(data in prop::collection::vec((gender(), label(), dist()), 2..50)) {
        let examples: Vec<CddExample> = data
            .iter()
            .map(|(g, t, d)| CddExample { group: *g, truth: *t, distribution: *d })
            .collect();
        let swapped: Vec<CddExample> = examples
            .iter()
            .map(|e| CddExample { group: e.group.other(), ..e.clone() })
            .collect();
        match (cdd(&examples), cdd(&swapped)) {
            (Ok(a), Ok(b)) => {
                for c in 0..5 {
                    prop_assert_eq!(a.per_class[c], -b.per_class[c]);
                    prop_assert!(a.per_class[c].abs() <= 1.0);
                }
                prop_assert!(a.per_class.iter().sum::<f64>().abs() < 1e-9);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "swap changed whether any stratum is usable"),
        }
        let mirrored: Vec<CddExample> = examples.iter().cloned().chain(swapped).collect();
        let sym = cdd(&mirrored).unwrap();
        prop_assert!(sym.per_class.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn kfold_balances_cells(cells in prop::collection::vec((gender(), 0usize..4, 1usize..40), 1..6), seed in any::<u64>()) {
        let mut corpus = Vec::new();
        for (ci, (g, d, size)) in cells.iter().enumerate() {
            for j in 0..*size {
                corpus.push(Interview {
                    id: format!("{ci}-{j}"),
                    turns: vec![Turn::new(Speaker::Interviewee, "x")],
                    demographics: Some(Demographics::new(*g, format!("d{d}"), 40).unwrap()),
                    labels: BTreeMap::new(),
                });
            }
        }
        prop_assume!(corpus.len() >= 5);
        let folds = stratified_kfold(&corpus, 5, seed).unwrap();
        prop_assert_eq!(&folds, &stratified_kfold(&corpus, 5, seed).unwrap());
        let mut counts: BTreeMap<(Gender, String), [usize; 5]> = BTreeMap::new();
        for iv in &corpus {
            let d = iv.demographics.as_ref().unwrap();
            counts.entry((d.gender, d.diagnosis.clone())).or_default()[folds.fold_of(&iv.id).unwrap()] += 1;
        }
        for c in counts.values() {
            let expected = c.iter().sum::<usize>() as f64 / 5.0;
            prop_assert!(c.iter().all(|n| (*n as f64 - expected).abs() < 1.0));
        }
    }

    #[test]
    fn weighted_f1_bounds(pairs in prop::collection::vec((label(), label()), 1..200)) {
        let (p, t): (Vec<ClassLabel>, Vec<ClassLabel>) = pairs.iter().copied().unzip();
        let f = weighted_f1(&p, &t).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((weighted_f1(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        let (rp, rt): (Vec<ClassLabel>, Vec<ClassLabel>) = pairs.iter().rev().copied().unzip();
        prop_assert!((weighted_f1(&rp, &rt).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn fused_output_is_a_distribution(ds in prop::collection::vec(dist(), 1..8), raw in prop::collection::vec(0.01f64..1.0, 8)) {
        let preds: Vec<SegmentPrediction> = ds
            .iter()
            .enumerate()
            .map(|(i, d)| SegmentPrediction { interview_id: "P".into(), conflict: Conflict::SelfValue, segment_index: i, distribution: *d })
            .collect();
        let w = AggregatorWeights::from_raw(Conflict::SelfValue, &raw[..ds.len()]).unwrap();
        let fused = aggregate(&preds, &w).unwrap();
        let probs = fused.fused_distribution.probs();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let best = fused.label.index();
        prop_assert!(probs[..best].iter().all(|p| *p < probs[best]) && probs[best..].iter().all(|p| *p <= probs[best]));
        let plain = aggregate_unweighted(&preds).unwrap();
        for c in 0..5 {
            let mean = ds.iter().map(|d| d.probs()[c]).sum::<f64>() / ds.len() as f64;
            prop_assert!((plain.fused_distribution.probs()[c] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn retrieval_sorted_and_filtered(
        vecs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 1..60),
        q in prop::collection::vec(-1.0f64..1.0, 6),
        top_k in 1usize..10,
    ) {
        let chunks: Vec<KnowledgeChunk> = vecs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let source = KnowledgeSource::ALL[i % 3];
                let origin = format!("o{}", i % 4);
                KnowledgeChunk {
                    chunk_id: psyc_core::retrieval::chunk_id(source, &origin, i),
                    source,
                    origin_id: origin,
                    word_span: WordSpan { start: 0, end: 1 },
                    text: "t".into(),
                    embedding: EmbeddingVector::new(v.clone()).unwrap(),
                }
            })
            .collect();
        let mut index = VectorIndex::new();
        index.add(chunks).unwrap();
        let query = EmbeddingVector::new(q).unwrap();
        let filter = QueryFilter::sources([KnowledgeSource::TrainingInterview]).excluding_origin("o1");
        match index.query(&query, top_k, &filter) {
            Ok(hits) => {
                prop_assert!(hits.len() <= top_k);
                prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
                prop_assert!(hits.iter().all(|h| h.chunk.source == KnowledgeSource::TrainingInterview && h.chunk.origin_id != "o1"));
            }
            Err(_) => prop_assert!(!index.chunks().iter().any(|c| filter.accepts(c))),
        }
    }

    #[test]
    fn interval_shift_invariant(scores in prop::collection::vec(0.0f64..1.0, 2..50), shift in -1.0f64..1.0) {
        let (m, h) = confidence_interval(&scores, 0.95).unwrap();
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let (ms, hs) = confidence_interval(&shifted, 0.95).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!((ms - m - shift).abs() < 1e-9);
        prop_assert!((hs - h).abs() < 1e-9);
    }
}
