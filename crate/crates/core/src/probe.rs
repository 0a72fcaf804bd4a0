//! Probing classifier: one ReLU hidden layer as wide as the input, dropout
//! before the softmax layer, AdaGrad, and early stopping on dev loss.

use rand::seq::SliceRandom;
use rand::Rng as _;
use sha2::{Digest, Sha256};

use crate::nncore::{
    adagrad_update, softmax_cross_entropy, Checkpoint, LinearLayer, Parameter, Parameterized,
};
use crate::rng::{self, Rng};
use crate::tasks::TaskDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeMLP {
    pub hidden: LinearLayer,
    pub output: LinearLayer,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeTrainConfig {
    fn default() -> Self {
        ProbeTrainConfig {
            lr: 0.01,
            dropout: 0.8,
            patience: 5,
            max_epochs: 100,
            batch_size: 32,
            seed: 1,
        }
    }
}

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ProbeCache {
    /// Post-ReLU, post-dropout hidden activations.
    dropped: Vec<f64>,
    /// Per-unit factor applied after the ReLU (0, 1 or `1/(1-rate)`); empty in eval mode.
    mask: Vec<f64>,
    pre: Vec<f64>,
}

impl ProbeMLP {
    pub fn new(input: usize, classes: usize, dropout: f64, seed: u64) -> Result<Self> {
        if input == 0 || classes < 2 {
            return Err(Error::config("probe needs a positive input size and at least two classes"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config(format!("dropout rate must be in [0, 1), got {dropout}")));
        }
        let mut r = rng::seeded(rng::derive_seed_str(seed, "probe.init"));
        Ok(ProbeMLP {
            hidden: LinearLayer::new(input, input, &mut r),
            output: LinearLayer::new(input, classes, &mut r),
            dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.output.output_dim()
    }

    /// Class scores (unnormalized). In train mode dropout is applied to the
    /// hidden activations and units it drops are not computed.
    pub fn forward(&self, x: &[f64], train: Option<&mut Rng>) -> Result<(Vec<f64>, ProbeCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "probe expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let n = self.input_dim();
        let mask: Vec<f64> = match train {
            Some(g) if self.dropout > 0.0 => {
                let keep = 1.0 / (1.0 - self.dropout);
                (0..n).map(|_| if g.gen::<f64>() < self.dropout { 0.0 } else { keep }).collect()
            }
            _ => Vec::new(),
        };
        let w = &self.hidden.weight.value;
        let b = self.hidden.bias.value.data();
        let mut pre = vec![0.0; n];
        let mut dropped = vec![0.0; n];
        for j in 0..n {
            let m = if mask.is_empty() { 1.0 } else { mask[j] };
            if m == 0.0 {
                continue;
            }
            pre[j] = b[j] + crate::nncore::dot(w.row(j), x);
            dropped[j] = pre[j].max(0.0) * m;
        }
        let scores = self.output.forward(&dropped)?;
        Ok((scores, ProbeCache { dropped, mask, pre }))
    }

    fn backward(&mut self, x: &[f64], cache: &ProbeCache, grad_scores: &[f64]) {
        let d_dropped = self.output.backward(&cache.dropped, grad_scores);
        let d_pre: Vec<f64> = (0..d_dropped.len())
            .map(|j| {
                let m = if cache.mask.is_empty() { 1.0 } else { cache.mask[j] };
                if cache.pre[j] > 0.0 {
                    d_dropped[j] * m
                } else {
                    0.0
                }
            })
            .collect();
        self.hidden.backward_params(x, &d_pre);
    }

    /// Cross-entropy of one instance; with `grad_scale` also accumulates gradients.
    pub fn loss(&mut self, x: &[f64], label: usize, train: Option<&mut Rng>, grad_scale: Option<f64>) -> Result<f64> {
        let (scores, cache) = self.forward(x, train)?;
        let (loss, grad) = softmax_cross_entropy(&scores, label)?;
        if let Some(s) = grad_scale {
            let g: Vec<f64> = grad.iter().map(|v| v * s).collect();
            self.backward(x, &cache, &g);
        }
        Ok(loss)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let (scores, _) = self.forward(x, None)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Mean eval-mode cross-entropy over a dataset.
    pub fn mean_loss(&self, data: &TaskDataset) -> Result<f64> {
        let mut m = self.clone();
        let mut total = 0.0;
        for inst in &data.instances {
            total += m.loss(&inst.input, inst.label, None, None)?;
        }
        Ok(total / data.len().max(1) as f64)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        Parameterized::to_checkpoint(self, &mut c, "probe.");
        c.insert_scalar("probe.dropout", self.dropout);
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let w = c.require("probe.hidden.weight")?;
        let o = c.require("probe.output.weight")?;
        let mut m = ProbeMLP {
            hidden: LinearLayer::zeros(w.shape()[1], w.shape()[0]),
            output: LinearLayer::zeros(o.shape()[1], o.shape()[0]),
            dropout: c.scalar("probe.dropout")?,
        };
        m.load_checkpoint(c, "probe.")?;
        if m.hidden.output_dim() != m.hidden.input_dim() || m.output.input_dim() != m.hidden.output_dim() {
            return Err(Error::dim("probe checkpoint has inconsistent layer sizes"));
        }
        Ok(m)
    }
}

impl Parameterized for ProbeMLP {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        let mut v: Vec<_> = self.hidden.named_params().into_iter().map(|(n, p)| (format!("hidden.{n}"), p)).collect();
        v.extend(self.output.named_params().into_iter().map(|(n, p)| (format!("output.{n}"), p)));
        v
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        let mut v: Vec<_> = self
            .hidden
            .named_params_mut()
            .into_iter()
            .map(|(n, p)| (format!("hidden.{n}"), p))
            .collect();
        v.extend(self.output.named_params_mut().into_iter().map(|(n, p)| (format!("output.{n}"), p)));
        v
    }
}

/// Scores for a probe given only an input vector, for callers that hold their own RNG.
pub fn probe_forward(model: &ProbeMLP, x: &[f64], train: Option<&mut Rng>) -> Result<Vec<f64>> {
    Ok(model.forward(x, train)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrainOutcome {
    pub model: ProbeMLP,
    /// Eval-mode dev loss after each epoch.
    pub dev_losses: Vec<f64>,
    pub train_losses: Vec<f64>,
    pub best_epoch: usize,
}

fn check_dataset(d: &TaskDataset, what: &str) -> Result<()> {
    if d.is_empty() {
        return Err(Error::data(format!("{what} split is empty")));
    }
    Ok(())
}

/// Trains on `train`, selects the epoch with the lowest dev loss, and stops
/// after `patience` epochs without improvement.
pub fn probe_train(train: &TaskDataset, dev: &TaskDataset, config: &ProbeTrainConfig) -> Result<ProbeTrainOutcome> {
    check_dataset(train, "probe train")?;
    check_dataset(dev, "probe dev")?;
    if train.input_dim() != dev.input_dim() || train.num_classes != dev.num_classes {
        return Err(Error::dim("probe train and dev datasets disagree on shape"));
    }
    if config.batch_size == 0 || config.max_epochs == 0 || config.lr <= 0.0 {
        return Err(Error::config("probe training needs positive batch size, epochs and learning rate"));
    }
    let mut model = ProbeMLP::new(train.input_dim(), train.num_classes, config.dropout, config.seed)?;
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut bad = 0;
    let mut dev_losses = Vec::new();
    let mut train_losses = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng::stream(rng::derive_seed_str(config.seed, "probe.shuffle"), epoch as u64));
        let mut drop_rng = rng::stream(rng::derive_seed_str(config.seed, "probe.dropout"), epoch as u64);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let inst = &train.instances[i];
                total += model.loss(&inst.input, inst.label, Some(&mut drop_rng), Some(scale))?;
            }
            for p in model.params_mut() {
                adagrad_update(p, config.lr);
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("probe training loss diverged in epoch {epoch}")));
        }
        train_losses.push(total / train.len() as f64);
        let dev_loss = model.mean_loss(dev)?;
        if !dev_loss.is_finite() {
            return Err(Error::NonFinite(format!("probe dev loss is {dev_loss} after epoch {epoch}")));
        }
        dev_losses.push(dev_loss);
        if dev_loss < best_loss {
            best_loss = dev_loss;
            best = model.clone();
            best_epoch = epoch;
            bad = 0;
        } else {
            bad += 1;
            if bad >= config.patience {
                break;
            }
        }
    }
    Ok(ProbeTrainOutcome { model: best, dev_losses, train_losses, best_epoch })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEval {
    pub accuracy: f64,
    /// 1 where the prediction matched the label, in dataset order.
    pub correct: Vec<u8>,
}

impl ProbeEval {
    pub fn from_correct(correct: Vec<u8>) -> Result<Self> {
        if correct.is_empty() {
            return Err(Error::data("cannot score an empty dataset"));
        }
        let accuracy = correct.iter().map(|&c| f64::from(c)).sum::<f64>() / correct.len() as f64;
        Ok(ProbeEval { accuracy, correct })
    }

    /// Hex SHA-256 of the correctness bits.
    pub fn correct_digest(&self) -> String {
        hex::encode(Sha256::digest(&self.correct))
    }
}

pub fn probe_eval(model: &ProbeMLP, data: &TaskDataset) -> Result<ProbeEval> {
    check_dataset(data, "evaluation")?;
    if data.input_dim() != model.input_dim() {
        return Err(Error::dim(format!(
            "probe takes {}-dim inputs, dataset has {}",
            model.input_dim(),
            data.input_dim()
        )));
    }
    let correct = data
        .instances
        .iter()
        .map(|i| Ok(u8::from(model.predict(&i.input)? == i.label)))
        .collect::<Result<Vec<u8>>>()?;
    ProbeEval::from_correct(correct)
}

/// Accuracy of always predicting `class`.
pub fn constant_class_accuracy(data: &TaskDataset, class: usize) -> Result<ProbeEval> {
    ProbeEval::from_correct(data.instances.iter().map(|i| u8::from(i.label == class)).collect())
}

/// Most frequent label (smallest id among ties) and its share.
pub fn majority_class(data: &TaskDataset) -> (usize, f64) {
    let mut counts = vec![0usize; data.num_classes.max(1)];
    for i in &data.instances {
        counts[i.label] += 1;
    }
    let (mut best, mut n) = (0, 0);
    for (c, &k) in counts.iter().enumerate() {
        if k > n {
            best = c;
            n = k;
        }
    }
    (best, n as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::grad_check;
    use crate::tasks::{InstanceMeta, TaskInstance, TaskKind};
    use rand_distr_free::normal;

    /// Box-Muller without extra dependencies.
    mod rand_distr_free {
        use rand::Rng;
        pub fn normal<R: Rng>(r: &mut R) -> f64 {
            let u1: f64 = r.gen_range(f64::EPSILON..1.0);
            let u2: f64 = r.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    fn dataset(points: Vec<(Vec<f64>, usize)>, classes: usize) -> TaskDataset {
        let dim = points[0].0.len();
        TaskDataset {
            task: if classes == 2 { TaskKind::Content } else { TaskKind::Length },
            instances: points
                .into_iter()
                .enumerate()
                .map(|(i, (input, label))| TaskInstance {
                    input,
                    label,
                    meta: InstanceMeta {
                        task: TaskKind::Content,
                        label,
                        sent_id: i as u64,
                        words: vec![],
                        positions: vec![],
                        len: 5,
                    },
                })
                .collect(),
            num_classes: classes,
            // content input width is k + d
            sentence_dim: dim - dim / 2,
            word_dim: dim / 2,
            seed: 0,
            encoder_digest: String::new(),
            report: Default::default(),
        }
    }

    fn blobs(n: usize, seed: u64) -> TaskDataset {
        let mut r = rng::seeded(seed);
        let pts = (0..n)
            .map(|i| {
                let label = i % 2;
                let c = if label == 1 { 2.0 } else { -2.0 };
                (vec![c + 0.5 * normal(&mut r), c + 0.5 * normal(&mut r)], label)
            })
            .collect();
        dataset(pts, 2)
    }

    #[test]
    fn zero_weights_give_uniform_loss() {
        let mut m = ProbeMLP::new(4, 8, 0.0, 1).unwrap();
        m.zero_grads();
        for p in m.params_mut() {
            p.value.fill(0.0);
        }
        let l = m.loss(&[1.0, 2.0, 3.0, 4.0], 3, None, None).unwrap();
        assert!((l - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn eval_mode_is_deterministic_and_checks_dims() {
        let m = ProbeMLP::new(3, 2, 0.8, 1).unwrap();
        let x = [0.3, -0.2, 0.9];
        assert_eq!(probe_forward(&m, &x, None).unwrap(), probe_forward(&m, &x, None).unwrap());
        assert!(matches!(probe_forward(&m, &[1.0], None), Err(Error::Dimension(_))));
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        let mut m = ProbeMLP::new(5, 3, 0.5, 2).unwrap();
        for p in m.params_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v *= 5.0);
        }
        let x = [0.4, -1.2, 0.8, 0.1, -0.3];
        let err = grad_check(
            &mut m,
            |m| m.params_mut(),
            |m, backward| {
                let mut g = rng::seeded(4);
                m.loss(&x, 1, Some(&mut g), backward.then_some(1.0))
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn separable_blobs_are_learned() {
        let train = blobs(200, 1);
        let dev = blobs(200, 2);
        let out = probe_train(&train, &dev, &ProbeTrainConfig::default()).unwrap();
        let acc = probe_eval(&out.model, &dev).unwrap().accuracy;
        assert!(acc >= 0.95, "dev accuracy {acc}");
        // returned model is the best dev-loss epoch
        let min = out.dev_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(out.dev_losses[out.best_epoch], min);
        assert!((out.model.mean_loss(&dev).unwrap() - min).abs() < 1e-12);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let train = blobs(60, 3);
        let dev = blobs(20, 4);
        let cfg = ProbeTrainConfig { max_epochs: 5, ..Default::default() };
        let a = probe_train(&train, &dev, &cfg).unwrap();
        let b = probe_train(&train, &dev, &cfg).unwrap();
        assert_eq!(a.model.to_checkpoint().to_bytes(), b.model.to_checkpoint().to_bytes());
        let back = ProbeMLP::from_checkpoint(&a.model.to_checkpoint()).unwrap();
        assert_eq!(back.to_checkpoint().to_bytes(), a.model.to_checkpoint().to_bytes());
    }

    #[test]
    fn eval_accuracy_is_the_mean_of_correct_bits() {
        let data = blobs(50, 5);
        let m = ProbeMLP::new(2, 2, 0.8, 9).unwrap();
        let e = probe_eval(&m, &data).unwrap();
        let mean = e.correct.iter().map(|&c| c as f64).sum::<f64>() / e.correct.len() as f64;
        assert_eq!(e.accuracy, mean);
        assert_eq!(e, probe_eval(&m, &data).unwrap());
    }

    #[test]
    fn constant_predictor_scores_the_class_share() {
        let pts = (0..10).map(|i| (vec![0.0, 0.0], if i < 7 { 3 } else { i % 3 })).collect();
        let data = dataset(pts, 8);
        let (c, share) = majority_class(&data);
        assert_eq!((c, share), (3, 0.7));
        assert_eq!(constant_class_accuracy(&data, c).unwrap().accuracy, share);
    }

    #[test]
    fn empty_splits_are_rejected() {
        let mut e = blobs(4, 1);
        e.instances.clear();
        assert!(probe_train(&e, &blobs(4, 2), &ProbeTrainConfig::default()).is_err());
        assert!(probe_eval(&ProbeMLP::new(2, 2, 0.0, 0).unwrap(), &e).is_err());
    }
}
