//! Dataset generation invariants over random corpora and encoders.

use std::collections::BTreeSet;

use proptest::prelude::*;
use sentprobe::corpus::{build_vocab, permute_corpus, split_corpus, synthetic_corpus, Sentence};
use sentprobe::encoders::{skipgram_train, CbowEncoder, EdModel, SentenceEncoder, SkipGramConfig};
use sentprobe::tasks::{assemble, bin_length, sample, TaskKind};

fn corpus(raw: &[Vec<u8>]) -> (sentprobe::corpus::Vocabulary, Vec<Sentence>) {
    let toks: Vec<Vec<String>> = raw.iter().map(|s| s.iter().map(|w| format!("t{w}")).collect()).collect();
    let vocab = build_vocab(&toks, 1000).unwrap();
    let s = toks.iter().enumerate().map(|(i, t)| Sentence::from_tokens(i as u64 * 3 + 1, t, &vocab)).collect();
    (vocab, s)
}

fn raw_corpus() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..40, 5..25), 10..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn content_is_balanced_and_negatives_are_pool_words(raw in raw_corpus(), seed in any::<u64>()) {
        let (_, s) = corpus(&raw);
        let m = sample(TaskKind::Content, &s, seed).unwrap();
        let pool: BTreeSet<usize> = m.metas.iter().filter(|x| x.label == 1).map(|x| x.words[0]).collect();
        prop_assert_eq!(2 * m.metas.iter().filter(|x| x.label == 1).count(), m.metas.len());
        prop_assert_eq!(m.metas.len() / 2 + m.report.skipped.len(), s.len());
        for x in &m.metas {
            let sent = s.iter().find(|y| y.source_id == x.sent_id).unwrap();
            prop_assert_eq!(sent.tokens.contains(&x.words[0]), x.label == 1);
            prop_assert!(pool.contains(&x.words[0]));
        }
    }

    #[test]
    fn order_pairs_are_mirrors_in_sentence_order(raw in raw_corpus(), seed in any::<u64>()) {
        let (_, s) = corpus(&raw);
        let m = sample(TaskKind::Order, &s, seed).unwrap();
        let n = sample(TaskKind::OrderNoSentence, &s, seed).unwrap();
        prop_assert_eq!(m.metas.len(), n.metas.len());
        for (pair, bare) in m.metas.chunks(2).zip(n.metas.chunks(2)) {
            let (p, q) = (&pair[0], &pair[1]);
            prop_assert_eq!((p.label, q.label), (1, 0));
            prop_assert!(p.positions[0] < p.positions[1]);
            prop_assert_ne!(p.words[0], p.words[1]);
            prop_assert_eq!(&q.words, &vec![p.words[1], p.words[0]]);
            prop_assert_eq!(&bare[0].words, &p.words);
        }
    }

    #[test]
    fn length_labels_are_bins(raw in raw_corpus()) {
        let (_, s) = corpus(&raw);
        let m = sample(TaskKind::Length, &s, 0).unwrap();
        for (x, sent) in m.metas.iter().zip(&s) {
            prop_assert_eq!(x.label, bin_length(sent.len()).unwrap());
        }
    }

    #[test]
    fn controls_preserve_lengths_and_ids(raw in raw_corpus(), seed in any::<u64>()) {
        let (vocab, s) = corpus(&raw);
        let p = permute_corpus(&s, seed);
        let y = synthetic_corpus(&s, &vocab, seed).unwrap();
        for ((a, b), c) in s.iter().zip(&p).zip(&y) {
            prop_assert_eq!((a.source_id, a.len()), (b.source_id, b.len()));
            prop_assert_eq!((a.source_id, a.len()), (c.source_id, c.len()));
            let (mut x, mut z) = (a.tokens.clone(), b.tokens.clone());
            x.sort_unstable();
            z.sort_unstable();
            prop_assert_eq!(x, z);
        }
    }
}

/// The same sampled instances, assembled by two different encoders, line up
/// one for one; that is what makes paired tests across encoders valid.
#[test]
fn instances_align_across_encoders() {
    let raw: Vec<Vec<u8>> = (0..200u32).map(|i| (0..(5 + i % 9)).map(|j| ((i * 7 + j * 13) % 37) as u8).collect()).collect();
    let (vocab, s) = corpus(&raw);
    let split = split_corpus(&s, 100, 50, 50, 9).unwrap();
    let cbow = CbowEncoder::from_skipgram(
        &skipgram_train(&split.train, &vocab, &SkipGramConfig { dim: 6, epochs: 1, ..Default::default() }).unwrap(),
    );
    let ed = EdModel::new(vocab.len(), 5, 2).unwrap();
    for task in [TaskKind::Length, TaskKind::Content, TaskKind::Order, TaskKind::OrderNoSentence] {
        let m = sample(task, &split.test, 77).unwrap();
        let a = assemble(&m, &split.test, &cbow, "a").unwrap();
        let b = assemble(&m, &split.test, &ed, "b").unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.instances.iter().zip(&b.instances) {
            assert_eq!((&x.meta, x.label), (&y.meta, y.label));
        }
        let expected = task.input_dim(cbow.sentence_dim(), cbow.word_dim());
        assert!(a.instances.iter().all(|i| i.input.len() == expected), "{task:?}");
    }
}
