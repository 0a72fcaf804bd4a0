//! Corpus-level BLEU with clipped n-gram counts and a brevity penalty.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub score: f64,
    /// Modified precisions p_1..p_N.
    pub precisions: Vec<f64>,
    /// Clipped match and candidate n-gram totals per order.
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// BLEU of `candidates` against one reference each, aggregated over the corpus.
pub fn bleu<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> Result<BleuReport> {
    if candidates.len() != references.len() {
        return Err(Error::dim(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::data("BLEU of an empty corpus"));
    }
    if max_n == 0 {
        return Err(Error::config("BLEU max n-gram order must be positive"));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut c_len, mut r_len) = (0, 0);
    for (cand, refr) in candidates.iter().zip(references) {
        c_len += cand.len();
        r_len += refr.len();
        for n in 1..=max_n {
            let rc = ngram_counts(refr, n);
            for (g, k) in ngram_counts(cand, n) {
                matches[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        // an order with no candidate n-grams has nothing unmatched
        .map(|(&m, &t)| if t == 0 { 1.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if c_len == 0 {
        0.0
    } else if c_len < r_len {
        (1.0 - r_len as f64 / c_len as f64).exp()
    } else {
        1.0
    };
    let score = if precisions.contains(&0.0) {
        0.0
    } else if matches == totals && brevity_penalty == 1.0 {
        1.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        (brevity_penalty * mean_log.exp()).min(1.0)
    };
    Ok(BleuReport {
        score,
        precisions,
        matches,
        totals,
        brevity_penalty,
        candidate_len: c_len,
        reference_len: r_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn clipped_unigram_precision() {
        let r = bleu(&[toks("the the the the the the the")], &[toks("the cat is on the mat")], 4).unwrap();
        assert_eq!(r.matches[0], 2);
        assert_eq!(r.totals[0], 7);
        assert_eq!(r.precisions[0], 2.0 / 7.0);
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn identity_scores_one() {
        let c = vec![toks("a b c d e"), toks("x y")];
        let r = bleu(&c, &c, 4).unwrap();
        assert_eq!(r.score, 1.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn brevity_penalty_applies_to_short_output() {
        let r = bleu(&[toks("a b c d")], &[toks("a b c d e f g h")], 4).unwrap();
        assert!((r.brevity_penalty - (1.0f64 - 2.0).exp()).abs() < 1e-15);
        assert!((r.score - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn short_candidates_aggregate() {
        let r = bleu(&[toks("a b"), toks("c d e f g")], &[toks("a b"), toks("c d e f g")], 4).unwrap();
        assert_eq!(r.totals[3], 2);
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn orders_without_ngrams_are_vacuous() {
        let c = vec![toks("a"), toks("b c")];
        assert_eq!(bleu(&c, &c, 4).unwrap().score, 1.0);
        let r = bleu(&[toks("a")], &[toks("b")], 4).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn errors() {
        assert!(bleu::<String>(&[], &[], 4).is_err());
        assert!(bleu(&[toks("a")], &[], 4).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_order_free(pairs in proptest::collection::vec(
            (proptest::collection::vec(0u8..5, 1..10), proptest::collection::vec(0u8..5, 1..10)), 1..8)) {
            let (c, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let a = bleu(&c, &r, 4).unwrap();
            prop_assert!((0.0..=1.0).contains(&a.score));
            let (mut c2, mut r2) = (c.clone(), r.clone());
            c2.reverse();
            r2.reverse();
            prop_assert_eq!(a.score, bleu(&c2, &r2, 4).unwrap().score);
            prop_assert_eq!(a.score == 1.0, c == r);
        }
    }
}
