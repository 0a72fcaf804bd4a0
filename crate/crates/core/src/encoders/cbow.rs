use crate::corpus::Sentence;
use crate::nncore::Tensor;
use crate::{Error, Result};

use super::{SentenceEncoder, SkipGramModel};

/// Element-wise mean of the sentence's word vectors, summed in sentence order.
pub fn cbow_encode(sentence: &Sentence, word_vectors: &Tensor) -> Result<Vec<f64>> {
    if sentence.is_empty() {
        return Err(Error::data("cannot encode an empty sentence"));
    }
    let rows = word_vectors.shape()[0];
    let mut sum = vec![0.0; word_vectors.cols()];
    for &t in &sentence.tokens {
        if t >= rows {
            return Err(Error::data(format!("token id {t} has no word vector")));
        }
        for (s, v) in sum.iter_mut().zip(word_vectors.row(t)) {
            *s += v;
        }
    }
    let n = sentence.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Averaged skip-gram input vectors. The vectors are not normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct CbowEncoder {
    vectors: Tensor,
}

impl CbowEncoder {
    pub fn new(vectors: Tensor) -> Result<Self> {
        if vectors.shape().len() != 2 {
            return Err(Error::dim("word-vector table must be rank 2"));
        }
        Ok(CbowEncoder { vectors })
    }

    pub fn from_skipgram(model: &SkipGramModel) -> Self {
        CbowEncoder {
            vectors: model.input.vectors.value.clone(),
        }
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }
}

impl SentenceEncoder for CbowEncoder {
    fn kind(&self) -> &str {
        "cbow"
    }

    fn sentence_dim(&self) -> usize {
        self.vectors.cols()
    }

    fn word_dim(&self) -> usize {
        self.vectors.cols()
    }

    fn encode(&self, sentence: &Sentence) -> Result<Vec<f64>> {
        cbow_encode(sentence, &self.vectors)
    }

    fn word_vector(&self, token: usize) -> Result<Vec<f64>> {
        if token >= self.vectors.shape()[0] {
            return Err(Error::data(format!("token id {token} has no word vector")));
        }
        Ok(self.vectors.row(token).to_vec())
    }
}
