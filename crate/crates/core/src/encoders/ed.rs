//! LSTM auto-encoder.
//!
//! The encoder reads the sentence right to left and its final hidden state is
//! the sentence vector. The decoder starts from the encoder's final `(h, c)`,
//! is fed the begin symbol followed by the gold tokens (teacher forcing), and
//! predicts the sentence left to right followed by the end symbol. Word
//! embeddings are shared between encoder and decoder and have the same size
//! as the hidden state.
//!
//! Output symbols reserve ids 0 (begin) and 1 (end); vocabulary id `t` maps to
//! symbol `t + 2`.

use rand::seq::SliceRandom;

use crate::corpus::Sentence;
use crate::nncore::{
    adagrad_update, dropout, dropout_backward, softmax_cross_entropy, Checkpoint, DropoutMask,
    EmbeddingTable, LinearLayer, LstmCellParams, LstmStep, Parameter, Parameterized, Tensor,
};
use crate::rng::{self, Rng};
use crate::{Error, Result};

use super::SentenceEncoder;

pub const BOS_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const NUM_RESERVED: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EdModel {
    pub embedding: EmbeddingTable,
    pub encoder: LstmCellParams,
    pub decoder: LstmCellParams,
    pub output: LinearLayer,
}

/// Final encoder state handed to the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl EncoderState {
    /// Decoder start state built from a sentence vector alone (zero cell state).
    pub fn from_hidden(h: Vec<f64>) -> Self {
        let c = vec![0.0; h.len()];
        EncoderState { h, c }
    }
}

/// Loss statistics for one or more sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    /// Summed cross-entropy over predicted symbols.
    pub loss: f64,
    /// Teacher-forced argmax predictions that hit the target.
    pub correct: usize,
    pub predictions: usize,
}

impl LossStats {
    fn add(&mut self, o: LossStats) {
        self.loss += o.loss;
        self.correct += o.correct;
        self.predictions += o.predictions;
    }

    pub fn mean_loss(&self) -> f64 {
        self.loss / self.predictions.max(1) as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.predictions.max(1) as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    // strict comparison keeps the smallest id among ties
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl EdModel {
    /// `vocab_size` counts corpus vocabulary entries; two reserved symbols are added.
    pub fn new(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("encoder-decoder dimension must be positive"));
        }
        if vocab_size == 0 {
            return Err(Error::config("encoder-decoder needs a nonempty vocabulary"));
        }
        let mut r = rng::seeded(rng::derive_seed_str(seed, "ed.init"));
        let symbols = vocab_size + NUM_RESERVED;
        Ok(EdModel {
            embedding: EmbeddingTable::new(symbols, dim, &mut r),
            encoder: LstmCellParams::new(dim, dim, &mut r),
            decoder: LstmCellParams::new(dim, dim, &mut r),
            output: LinearLayer::new(dim, symbols, &mut r),
        })
    }

    pub fn dim(&self) -> usize {
        self.encoder.hidden_size()
    }

    /// Number of output symbols, reserved ones included.
    pub fn num_symbols(&self) -> usize {
        self.embedding.vocab_size()
    }

    pub fn vocab_size(&self) -> usize {
        self.num_symbols() - NUM_RESERVED
    }

    fn symbol(&self, token: usize) -> Result<usize> {
        if token >= self.vocab_size() {
            return Err(Error::data(format!(
                "token id {token} outside vocabulary of size {}",
                self.vocab_size()
            )));
        }
        Ok(token + NUM_RESERVED)
    }

    fn run_encoder(&self, symbols: &[usize]) -> Result<Vec<LstmStep>> {
        let k = self.dim();
        let mut steps: Vec<LstmStep> = Vec::with_capacity(symbols.len());
        let zero = vec![0.0; k];
        for &s in symbols {
            let (h, c) = match steps.last() {
                Some(st) => (&st.h, &st.c),
                None => (&zero, &zero),
            };
            let step = self.encoder.step(self.embedding.lookup(s)?, h, c)?;
            steps.push(step);
        }
        Ok(steps)
    }

    /// Runs the encoder over `tokens` in the order given, without reversing.
    pub fn encode_in_order(&self, tokens: &[usize]) -> Result<EncoderState> {
        if tokens.is_empty() {
            return Err(Error::data("cannot encode an empty sentence"));
        }
        let symbols = tokens.iter().map(|&t| self.symbol(t)).collect::<Result<Vec<_>>>()?;
        let last = self.run_encoder(&symbols)?.pop().expect("nonempty");
        Ok(EncoderState { h: last.h, c: last.c })
    }

    /// Final encoder state after reading `tokens` right to left.
    pub fn encode_state(&self, tokens: &[usize]) -> Result<EncoderState> {
        let reversed: Vec<usize> = tokens.iter().rev().copied().collect();
        self.encode_in_order(&reversed)
    }

    /// Greedy decoding from an encoder state. Stops after the end symbol (or
    /// the never-targeted begin symbol) or after `max_len` tokens.
    pub fn decode_greedy(&self, state: &EncoderState, max_len: usize) -> Result<Vec<usize>> {
        if state.h.len() != self.dim() || state.c.len() != self.dim() {
            return Err(Error::dim(format!(
                "decoder state must have size {}, got h={} c={}",
                self.dim(),
                state.h.len(),
                state.c.len()
            )));
        }
        let mut h = state.h.clone();
        let mut c = state.c.clone();
        let mut prev = BOS_ID;
        let mut out = Vec::new();
        while out.len() < max_len {
            let step = self.decoder.step(self.embedding.lookup(prev)?, &h, &c)?;
            let next = argmax(&self.output.forward(&step.h)?);
            if next < NUM_RESERVED {
                break;
            }
            out.push(next - NUM_RESERVED);
            prev = next;
            h = step.h;
            c = step.c;
        }
        Ok(out)
    }

    /// Reconstructs a sentence through the full auto-encoder.
    pub fn reconstruct(&self, tokens: &[usize], max_len: usize) -> Result<Vec<usize>> {
        self.decode_greedy(&self.encode_state(tokens)?, max_len)
    }

    /// Teacher-forced loss for one sentence. With `grad_scale`, gradients of
    /// `grad_scale * loss` are accumulated into the parameters. With `dropout`,
    /// inverted dropout is applied to decoder outputs before the projection.
    pub fn sentence_loss(
        &mut self,
        tokens: &[usize],
        dropout_cfg: Option<(f64, &mut Rng)>,
        grad_scale: Option<f64>,
    ) -> Result<LossStats> {
        if tokens.is_empty() {
            return Err(Error::data("cannot train on an empty sentence"));
        }
        let symbols = tokens.iter().map(|&t| self.symbol(t)).collect::<Result<Vec<_>>>()?;
        let enc_in: Vec<usize> = symbols.iter().rev().copied().collect();
        let enc_steps = self.run_encoder(&enc_in)?;

        let mut dec_in = Vec::with_capacity(symbols.len() + 1);
        dec_in.push(BOS_ID);
        dec_in.extend_from_slice(&symbols);
        let mut targets = symbols.clone();
        targets.push(EOS_ID);

        let (rate, mut drng) = match dropout_cfg {
            Some((r, g)) => (r, Some(g)),
            None => (0.0, None),
        };
        let last = enc_steps.last().expect("nonempty");
        let (mut h, mut c) = (last.h.clone(), last.c.clone());
        let mut dec_steps = Vec::with_capacity(dec_in.len());
        let mut outs: Vec<(Vec<f64>, DropoutMask, Vec<f64>)> = Vec::with_capacity(dec_in.len());
        let mut stats = LossStats::default();
        for (&x, &target) in dec_in.iter().zip(&targets) {
            let step = self.decoder.step(self.embedding.lookup(x)?, &h, &c)?;
            let (y, mask) = match drng.as_deref_mut() {
                Some(g) => dropout(&step.h, rate, g, true)?,
                None => (step.h.clone(), DropoutMask::default()),
            };
            let logits = self.output.forward(&y)?;
            let (loss, grad) = softmax_cross_entropy(&logits, target)?;
            stats.loss += loss;
            stats.predictions += 1;
            if argmax(&logits) == target {
                stats.correct += 1;
            }
            h = step.h.clone();
            c = step.c.clone();
            dec_steps.push(step);
            if grad_scale.is_some() {
                outs.push((y, mask, grad));
            }
        }
        if !stats.loss.is_finite() {
            return Err(Error::NonFinite(format!("sentence loss is {}", stats.loss)));
        }

        let Some(scale) = grad_scale else {
            return Ok(stats);
        };
        let k = self.dim();
        let mut dh = vec![0.0; k];
        let mut dc = vec![0.0; k];
        for t in (0..dec_steps.len()).rev() {
            let (y, mask, grad) = &outs[t];
            let g: Vec<f64> = grad.iter().map(|v| v * scale).collect();
            let dy = self.output.backward(y, &g);
            for (a, b) in dh.iter_mut().zip(dropout_backward(&dy, mask)) {
                *a += b;
            }
            let (dx, dh_prev, dc_prev) = self.decoder.backward(&dec_steps[t], &dh, &dc);
            self.embedding.accumulate_grad(dec_in[t], &dx);
            dh = dh_prev;
            dc = dc_prev;
        }
        for t in (0..enc_steps.len()).rev() {
            let (dx, dh_prev, dc_prev) = self.encoder.backward(&enc_steps[t], &dh, &dc);
            self.embedding.accumulate_grad(enc_in[t], &dx);
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok(stats)
    }

    /// Eval-mode loss and teacher-forced accuracy over a corpus.
    pub fn evaluate(&self, sentences: &[Sentence]) -> Result<LossStats> {
        let mut model = self.clone();
        let mut total = LossStats::default();
        for s in sentences {
            total.add(model.sentence_loss(&s.tokens, None, None)?);
        }
        Ok(total)
    }

    fn dense_params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.encoder.params_mut();
        v.extend(self.decoder.params_mut());
        v.extend(self.output.params_mut());
        v
    }

    /// Global-norm clipping followed by one AdaGrad step; embedding rows
    /// without gradient are skipped.
    fn apply_update(&mut self, lr: f64, clip: f64) {
        let dense: f64 = self
            .dense_params_mut()
            .iter()
            .flat_map(|p| p.grad.data())
            .map(|g| g * g)
            .sum();
        let emb: f64 = self.embedding.vectors.grad.data().iter().map(|g| g * g).sum();
        let norm = (dense + emb).sqrt();
        if norm > clip {
            let s = clip / norm;
            for p in self.dense_params_mut() {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
            }
            self.embedding.vectors.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
        for p in self.dense_params_mut() {
            adagrad_update(p, lr);
        }
        self.embedding.adagrad_update_touched(lr);
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        Parameterized::to_checkpoint(self, &mut c, "ed.");
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        Self::from_checkpoint_prefixed(c, "ed.")
    }

    fn from_checkpoint_prefixed(c: &Checkpoint, prefix: &str) -> Result<Self> {
        let emb = c.require(&format!("{prefix}embedding.vectors"))?;
        if emb.shape().len() != 2 || emb.shape()[0] <= NUM_RESERVED {
            return Err(Error::dim("malformed encoder-decoder embedding table"));
        }
        let (symbols, dim) = (emb.shape()[0], emb.shape()[1]);
        let mut m = EdModel {
            embedding: EmbeddingTable::from_parameter(Parameter::zeros(&[symbols, dim]))?,
            encoder: LstmCellParams::zeros(dim, dim),
            decoder: LstmCellParams::zeros(dim, dim),
            output: LinearLayer::zeros(dim, symbols),
        };
        m.load_checkpoint(c, prefix)?;
        Ok(m)
    }
}

impl Parameterized for EdModel {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        let mut v = Vec::new();
        for (prefix, ps) in [
            ("embedding.", self.embedding.named_params()),
            ("encoder.", self.encoder.named_params()),
            ("decoder.", self.decoder.named_params()),
            ("output.", self.output.named_params()),
        ] {
            v.extend(ps.into_iter().map(|(n, p)| (format!("{prefix}{n}"), p)));
        }
        v
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        let mut v = Vec::new();
        for (prefix, ps) in [
            ("embedding.", self.embedding.named_params_mut()),
            ("encoder.", self.encoder.named_params_mut()),
            ("decoder.", self.decoder.named_params_mut()),
            ("output.", self.output.named_params_mut()),
        ] {
            v.extend(ps.into_iter().map(|(n, p)| (format!("{prefix}{n}"), p)));
        }
        v
    }

    fn zero_grads(&mut self) {
        self.embedding.zero_grads();
        for p in self.dense_params_mut() {
            p.zero_grad();
        }
    }
}

impl SentenceEncoder for EdModel {
    fn kind(&self) -> &str {
        "ed"
    }

    fn sentence_dim(&self) -> usize {
        self.dim()
    }

    fn word_dim(&self) -> usize {
        self.dim()
    }

    fn encode(&self, sentence: &Sentence) -> Result<Vec<f64>> {
        Ok(self.encode_state(&sentence.tokens)?.h)
    }

    /// The shared input embedding row of the token.
    fn word_vector(&self, token: usize) -> Result<Vec<f64>> {
        Ok(self.embedding.lookup(self.symbol(token)?)?.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdTrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    /// Global gradient-norm threshold.
    pub clip: f64,
    /// Epochs without dev-loss improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop early once teacher-forced dev accuracy reaches this value.
    pub target_dev_accuracy: Option<f64>,
}

impl Default for EdTrainConfig {
    fn default() -> Self {
        EdTrainConfig {
            dim: 32,
            batch_size: 32,
            lr: 0.01,
            dropout: 0.1,
            clip: 5.0,
            patience: 5,
            max_epochs: 50,
            seed: 1,
            target_dev_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdEpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_loss: f64,
    pub dev_accuracy: f64,
}

/// Resumable training loop with early stopping on dev loss.
#[derive(Debug, Clone)]
pub struct EdTrainer {
    config: EdTrainConfig,
    model: EdModel,
    best: EdModel,
    best_dev_loss: f64,
    bad_epochs: usize,
    history: Vec<EdEpochStats>,
    done: bool,
}

impl EdTrainer {
    pub fn new(vocab_size: usize, config: EdTrainConfig) -> Result<Self> {
        if config.batch_size == 0 || config.max_epochs == 0 || config.lr <= 0.0 || config.clip <= 0.0 {
            return Err(Error::config(
                "encoder-decoder training needs positive batch size, epochs, learning rate and clip",
            ));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", config.dropout)));
        }
        let model = EdModel::new(vocab_size, config.dim, config.seed)?;
        Ok(EdTrainer {
            best: model.clone(),
            model,
            config,
            best_dev_loss: f64::INFINITY,
            bad_epochs: 0,
            history: Vec::new(),
            done: false,
        })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn history(&self) -> &[EdEpochStats] {
        &self.history
    }

    pub fn model(&self) -> &EdModel {
        &self.model
    }

    pub fn best(&self) -> &EdModel {
        &self.best
    }

    pub fn run_epoch(&mut self, train: &[Sentence], dev: &[Sentence]) -> Result<EdEpochStats> {
        if train.is_empty() || dev.is_empty() {
            return Err(Error::data("encoder-decoder training needs nonempty train and dev sets"));
        }
        let epoch = self.history.len();
        let cfg = &self.config;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(rng::derive_seed_str(cfg.seed, "ed.shuffle"), epoch as u64));
        let mut drop_rng = rng::stream(rng::derive_seed_str(cfg.seed, "ed.dropout"), epoch as u64);

        let mut total = LossStats::default();
        self.model.zero_grads();
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let n_pred: usize = batch.iter().map(|&i| train[i].len() + 1).sum();
            let scale = 1.0 / n_pred as f64;
            for &i in batch {
                let st = self.model.sentence_loss(
                    &train[i].tokens,
                    Some((cfg.dropout, &mut drop_rng)),
                    Some(scale),
                )?;
                total.add(st);
            }
            if !total.loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss diverged in epoch {epoch}, batch {b}"
                )));
            }
            self.model.apply_update(cfg.lr, cfg.clip);
        }
        let dev_stats = self.model.evaluate(dev)?;
        let stats = EdEpochStats {
            epoch,
            train_loss: total.mean_loss(),
            train_accuracy: total.accuracy(),
            dev_loss: dev_stats.mean_loss(),
            dev_accuracy: dev_stats.accuracy(),
        };
        if !stats.dev_loss.is_finite() {
            return Err(Error::NonFinite(format!("dev loss is {} after epoch {epoch}", stats.dev_loss)));
        }
        self.history.push(stats);
        if stats.dev_loss < self.best_dev_loss {
            self.best_dev_loss = stats.dev_loss;
            self.best = self.model.clone();
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        let hit_target = cfg.target_dev_accuracy.is_some_and(|t| stats.dev_accuracy >= t);
        self.done = self.bad_epochs >= cfg.patience || self.history.len() >= cfg.max_epochs || hit_target;
        Ok(stats)
    }

    /// Best-dev model and the training curve.
    pub fn finish(self) -> (EdModel, Vec<EdEpochStats>) {
        let mut best = self.best;
        best.zero_grads();
        best.embedding.forget_touched();
        (best, self.history)
    }

    /// Everything needed to resume: current and best weights, optimizer state,
    /// counters and the curve so far.
    pub fn state_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        Parameterized::to_checkpoint(&self.model, &mut c, "model.");
        self.model.optimizer_to_checkpoint(&mut c, "opt.");
        Parameterized::to_checkpoint(&self.best, &mut c, "best.");
        c.insert_scalar("state.best_dev_loss", self.best_dev_loss);
        c.insert_scalar("state.bad_epochs", self.bad_epochs as f64);
        c.insert_scalar("state.done", if self.done { 1.0 } else { 0.0 });
        if !self.history.is_empty() {
            let rows: Vec<f64> = self
                .history
                .iter()
                .flat_map(|s| [s.epoch as f64, s.train_loss, s.train_accuracy, s.dev_loss, s.dev_accuracy])
                .collect();
            c.insert("state.history", Tensor::new(vec![self.history.len(), 5], rows).expect("shape"));
        }
        c
    }

    pub fn from_state_checkpoint(c: &Checkpoint, config: EdTrainConfig) -> Result<Self> {
        let mut model = EdModel::from_checkpoint_prefixed(c, "model.")?;
        model.load_optimizer_checkpoint(c, "opt.")?;
        let best = EdModel::from_checkpoint_prefixed(c, "best.")?;
        if model.dim() != config.dim {
            return Err(Error::config("resume state was trained with a different dimension"));
        }
        let history = match c.get("state.history") {
            Some(t) => (0..t.shape()[0])
                .map(|i| {
                    let r = t.row(i);
                    EdEpochStats {
                        epoch: r[0] as usize,
                        train_loss: r[1],
                        train_accuracy: r[2],
                        dev_loss: r[3],
                        dev_accuracy: r[4],
                    }
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(EdTrainer {
            config,
            model,
            best,
            best_dev_loss: c.scalar("state.best_dev_loss")?,
            bad_epochs: c.scalar("state.bad_epochs")? as usize,
            done: c.scalar("state.done")? != 0.0,
            history,
        })
    }
}

/// Trains an auto-encoder to completion and returns the best-dev model.
pub fn ed_train(
    train: &[Sentence],
    dev: &[Sentence],
    vocab_size: usize,
    config: &EdTrainConfig,
) -> Result<(EdModel, Vec<EdEpochStats>)> {
    let mut trainer = EdTrainer::new(vocab_size, config.clone())?;
    while !trainer.is_done() {
        trainer.run_epoch(train, dev)?;
    }
    Ok(trainer.finish())
}
