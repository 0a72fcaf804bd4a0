//! Corpus preparation: tokenization, vocabulary, length filtering, splits and
//! the control corpora (permuted and random-word sentences).

mod control;
mod sentence;
mod split;
mod tokenize;
mod vocab;

pub use control::{permute_corpus, permute_sentence, synthesize_random_sentence, synthetic_corpus};
pub use sentence::{filter_lengths, read_lines, Sentence, MAX_LEN, MIN_LEN};
pub use split::{split_corpus, CorpusSplit, SplitManifest};
pub use tokenize::{tokenize, tokenize_line};
pub use vocab::{build_vocab, Vocabulary, DEFAULT_VOCAB_CAP, UNK_ID, UNK_TOKEN};
