//! Sentence and word representations.
//!
//! Every encoder exposes the same [`SentenceEncoder`] surface so that task
//! generation and probing treat averaged skip-gram vectors, the LSTM
//! auto-encoder and externally supplied embeddings identically.

mod cbow;
mod ed;
mod external;
mod huffman;
mod skipgram;

pub use cbow::{cbow_encode, CbowEncoder};
pub use ed::{
    ed_train, EdEpochStats, EdModel, EdTrainConfig, EdTrainer, EncoderState, BOS_ID, EOS_ID,
    NUM_RESERVED,
};
pub use external::{
    load_external_embeddings, read_sentence_vectors, read_word_vectors, write_sentence_vectors,
    write_word_vectors, ExternalEmbeddingSet, ExternalEncoder,
};
pub use huffman::{build_huffman, HuffmanTree};
pub use skipgram::{skipgram_train, SkipGramConfig, SkipGramModel};

use crate::corpus::Sentence;
use crate::Result;

/// Maps sentences to fixed-size vectors and tokens to word vectors.
pub trait SentenceEncoder: Send + Sync {
    /// Short label used in reports, e.g. `cbow` or `ed`.
    fn kind(&self) -> &str;

    /// Sentence vector size k.
    fn sentence_dim(&self) -> usize;

    /// Word vector size d.
    fn word_dim(&self) -> usize;

    fn encode(&self, sentence: &Sentence) -> Result<Vec<f64>>;

    fn word_vector(&self, token: usize) -> Result<Vec<f64>>;
}
