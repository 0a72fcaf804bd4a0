//! Skip-gram word vectors trained with hierarchical softmax.

use crate::corpus::{Sentence, Vocabulary};
use crate::nncore::{dot, sigmoid, Checkpoint, EmbeddingTable, Parameter, Tensor};
use crate::rng;
use crate::{Error, Result};

use super::{build_huffman, HuffmanTree};

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    /// Starting learning rate, decayed linearly to `lr * 1e-4` over training.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 32,
            window: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    pub input: EmbeddingTable,
    pub tree: HuffmanTree,
    pub window: usize,
    counts: Vec<u64>,
    /// Mean `-log P(context | center)` per epoch.
    pub epoch_losses: Vec<f64>,
}

/// (center, context) positions within `window` of each other, clipped to the sentence.
pub(crate) fn context_pairs(len: usize, window: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(len.saturating_sub(1));
        (lo..=hi).filter(move |&j| j != i).map(move |j| (i, j))
    })
}

impl SkipGramModel {
    /// Untrained model: uniform input vectors and zero node vectors.
    pub fn new(vocab: &Vocabulary, dim: usize, window: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("skip-gram dimension must be positive"));
        }
        // unknown-token counts may be zero; the tree only needs an ordering
        let counts = vocab.counts().to_vec();
        let tree = build_huffman(&counts, dim)?;
        let input = EmbeddingTable::new(vocab.len(), dim, &mut rng::seeded(rng::derive_seed_str(seed, "skipgram.init")));
        Ok(SkipGramModel {
            input,
            tree,
            window,
            counts,
            epoch_losses: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.input.vocab_size()
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.vocab_size() {
            return Err(Error::data(format!(
                "word id {id} outside vocabulary of size {}",
                self.vocab_size()
            )));
        }
        Ok(())
    }

    /// `P(context | center)` as the product of branch probabilities along the
    /// context word's tree path.
    pub fn hs_probability(&self, center: usize, context: usize) -> Result<f64> {
        self.check_id(center)?;
        self.check_id(context)?;
        let h = self.input.vectors.value.row(center);
        let nodes = &self.tree.node_vectors.value;
        Ok(self.tree.paths[context]
            .iter()
            .zip(&self.tree.codes[context])
            .map(|(&n, &bit)| {
                let x = dot(h, nodes.row(n));
                sigmoid(if bit == 0 { x } else { -x })
            })
            .product())
    }

    /// One SGD step on the pair; returns `-log P(context | center)` before the update.
    fn train_pair(&mut self, center: usize, context: usize, lr: f64, neu1e: &mut [f64]) -> f64 {
        neu1e.iter_mut().for_each(|v| *v = 0.0);
        let mut loss = 0.0;
        let path = &self.tree.paths[context];
        let code = &self.tree.codes[context];
        let h = self.input.vectors.value.row(center).to_vec();
        let nodes = &mut self.tree.node_vectors.value;
        for (&n, &bit) in path.iter().zip(code) {
            let u = nodes.row_mut(n);
            let f = sigmoid(dot(&h, u));
            let target = 1.0 - f64::from(bit);
            loss -= if bit == 0 { f.max(1e-300).ln() } else { (1.0 - f).max(1e-300).ln() };
            let g = lr * (target - f);
            for j in 0..h.len() {
                neu1e[j] += g * u[j];
                u[j] += g * h[j];
            }
        }
        for (v, e) in self.input.vectors.value.row_mut(center).iter_mut().zip(neu1e.iter()) {
            *v += e;
        }
        loss
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert("skipgram.input", self.input.vectors.value.clone());
        c.insert("skipgram.nodes", self.tree.node_vectors.value.clone());
        c.insert(
            "skipgram.counts",
            Tensor::from_vec(self.counts.iter().map(|&x| x as f64).collect()),
        );
        c.insert_scalar("skipgram.window", self.window as f64);
        if !self.epoch_losses.is_empty() {
            c.insert("skipgram.epoch_losses", Tensor::from_vec(self.epoch_losses.clone()));
        }
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let input = c.require("skipgram.input")?.clone();
        let counts: Vec<u64> = c.require("skipgram.counts")?.data().iter().map(|&x| x as u64).collect();
        let dim = input.cols();
        let mut tree = build_huffman(&counts, dim)?;
        tree.node_vectors.set_value(c.require("skipgram.nodes")?.clone())?;
        if input.shape()[0] != counts.len() {
            return Err(Error::dim("skip-gram input table and counts disagree on vocabulary size"));
        }
        Ok(SkipGramModel {
            input: EmbeddingTable::from_parameter(Parameter::new(input))?,
            tree,
            window: c.scalar("skipgram.window")? as usize,
            counts,
            epoch_losses: c
                .get("skipgram.epoch_losses")
                .map(|t| t.data().to_vec())
                .unwrap_or_default(),
        })
    }
}

/// Trains skip-gram vectors with plain SGD over every (center, context) pair
/// within `window` positions, sentences in corpus order.
pub fn skipgram_train(
    sentences: &[Sentence],
    vocab: &Vocabulary,
    config: &SkipGramConfig,
) -> Result<SkipGramModel> {
    let total_words: usize = sentences.iter().map(Sentence::len).sum();
    if total_words == 0 {
        return Err(Error::data("skip-gram training corpus is empty"));
    }
    if config.epochs == 0 {
        return Err(Error::config("skip-gram needs at least one epoch"));
    }
    let mut model = SkipGramModel::new(vocab, config.dim, config.window, config.seed)?;
    let mut neu1e = vec![0.0; config.dim];
    let schedule = (config.epochs * total_words) as f64;
    let mut seen = 0usize;
    for _ in 0..config.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for s in sentences {
            if let Some(&bad) = s.tokens.iter().find(|&&t| t >= vocab.len()) {
                return Err(Error::data(format!("token id {bad} outside vocabulary")));
            }
            let mut last_center = usize::MAX;
            let mut lr = config.lr;
            for (i, j) in context_pairs(s.len(), config.window) {
                if i != last_center {
                    lr = config.lr * (1.0 - seen as f64 / schedule).max(1e-4);
                    seen += 1;
                    last_center = i;
                }
                loss += model.train_pair(s.tokens[i], s.tokens[j], lr, &mut neu1e);
                pairs += 1;
            }
            // single-token sentences have no pairs but still advance the schedule
            if s.len() == 1 {
                seen += 1;
            }
        }
        model.epoch_losses.push(loss / pairs.max(1) as f64);
    }
    Ok(model)
}

impl SkipGramModel {
    #[doc(hidden)]
    pub fn randomize_nodes(&mut self, seed: u64) {
        self.tree.randomize(&mut rng::seeded(seed));
    }
}
