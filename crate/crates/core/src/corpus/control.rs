//! Control corpora: sentences with shuffled word order, and sentences made of
//! uniformly random vocabulary words.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Sentence, Vocabulary, MAX_LEN, MIN_LEN};
use crate::rng;
use crate::{Error, Result};

/// Uniformly random reordering of the sentence's tokens (Fisher-Yates).
pub fn permute_sentence<R: Rng + ?Sized>(s: &Sentence, rng: &mut R) -> Sentence {
    let mut tokens = s.tokens.clone();
    tokens.shuffle(rng);
    Sentence::new(s.source_id, tokens)
}

/// Permutes every sentence with a stream derived from `(seed, source_id)`.
pub fn permute_corpus(sentences: &[Sentence], seed: u64) -> Vec<Sentence> {
    sentences
        .iter()
        .map(|s| permute_sentence(s, &mut rng::stream(seed, s.source_id)))
        .collect()
}

/// A sentence of `length` tokens drawn uniformly with replacement from the
/// non-unknown vocabulary ids.
pub fn synthesize_random_sentence<R: Rng + ?Sized>(
    length: usize,
    vocab: &Vocabulary,
    source_id: u64,
    rng: &mut R,
) -> Result<Sentence> {
    if !(MIN_LEN..=MAX_LEN).contains(&length) {
        return Err(Error::config(format!(
            "synthetic sentence length {length} outside {MIN_LEN}..={MAX_LEN}"
        )));
    }
    if vocab.len() < 2 {
        return Err(Error::data("vocabulary has no words besides the unknown token"));
    }
    let tokens = (0..length).map(|_| rng.gen_range(1..vocab.len())).collect();
    Ok(Sentence::new(source_id, tokens))
}

/// Replaces every word of every sentence with a random word, keeping lengths
/// and source ids.
pub fn synthetic_corpus(sentences: &[Sentence], vocab: &Vocabulary, seed: u64) -> Result<Vec<Sentence>> {
    sentences
        .iter()
        .map(|s| synthesize_random_sentence(s.len(), vocab, s.source_id, &mut rng::stream(seed, s.source_id)))
        .collect()
}
