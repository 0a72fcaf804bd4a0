//! Corpus generators shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use rand::Rng;
use sentprobe::corpus::{build_vocab, Sentence, Vocabulary};
use sentprobe::rng;
use sentprobe::tasks::LengthBins;

/// A structured toy language: words belong to classes, each class has three
/// likely successors, and word frequencies within a class are geometric.
/// Lengths are uniform over length bins, then uniform inside the bin.
pub fn toy_language(n: usize, classes: usize, per_class: usize, seed: u64) -> Vec<Vec<String>> {
    let mut r = rng::seeded(seed);
    let succ: Vec<[usize; 3]> = (0..classes)
        .map(|_| [r.gen_range(0..classes), r.gen_range(0..classes), r.gen_range(0..classes)])
        .collect();
    let bins = LengthBins::default();
    (0..n)
        .map(|_| {
            let (lo, hi) = bins.bins()[r.gen_range(0..bins.len())];
            let len = r.gen_range(lo..=hi);
            let mut c = r.gen_range(0..classes);
            (0..len)
                .map(|_| {
                    let mut k = 0;
                    while k + 1 < per_class && r.gen::<f64>() < 0.9 {
                        k += 1;
                    }
                    let w = format!("c{c}w{k}");
                    let u: f64 = r.gen();
                    c = if u < 0.6 {
                        succ[c][0]
                    } else if u < 0.9 {
                        succ[c][1]
                    } else {
                        succ[c][2]
                    };
                    w
                })
                .collect()
        })
        .collect()
}

/// Uniformly random words `w1..w{vocab-1}`, lengths uniform in `lens`.
pub fn random_words(n: usize, lens: std::ops::RangeInclusive<usize>, vocab: usize, seed: u64) -> Vec<Vec<String>> {
    let mut r = rng::seeded(seed);
    (0..n)
        .map(|_| {
            let len = r.gen_range(lens.clone());
            (0..len).map(|_| format!("w{}", r.gen_range(1..vocab))).collect()
        })
        .collect()
}

pub fn encode(tokens: &[Vec<String>], cap: usize) -> (Vocabulary, Vec<Sentence>) {
    let vocab = build_vocab(tokens, cap).unwrap();
    let s = tokens.iter().enumerate().map(|(i, t)| Sentence::from_tokens(i as u64, t, &vocab)).collect();
    (vocab, s)
}

pub fn write_corpus(path: &Path, tokens: &[Vec<String>]) {
    let text: String = tokens.iter().map(|t| t.join(" ") + "\n").collect();
    std::fs::write(path, text).unwrap();
}
