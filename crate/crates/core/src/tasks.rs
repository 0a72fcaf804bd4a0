//! Auxiliary prediction datasets.
//!
//! Generation happens in two steps. Sampling picks words and positions from
//! the sentences and depends only on the sentences and the seed; assembly
//! turns that metadata into input vectors with a particular encoder. Datasets
//! sampled with the same seed therefore line up instance by instance across
//! encoders, which is what the paired significance tests rely on.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, MAX_LEN, MIN_LEN};
use crate::encoders::SentenceEncoder;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Length,
    Content,
    Order,
    /// Order task with the sentence vector dropped from the input.
    OrderNoSentence,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::Length, TaskKind::Content, TaskKind::Order, TaskKind::OrderNoSentence];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Length => "length",
            TaskKind::Content => "content",
            TaskKind::Order => "order",
            TaskKind::OrderNoSentence => "order_no_sentence",
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            TaskKind::Length => LengthBins::default().len(),
            _ => 2,
        }
    }

    /// Input width for sentence size `k` and word size `d`.
    pub fn input_dim(self, k: usize, d: usize) -> usize {
        match self {
            TaskKind::Length => k,
            TaskKind::Content => k + d,
            TaskKind::Order => k + 2 * d,
            TaskKind::OrderNoSentence => 2 * d,
        }
    }

    pub fn needs_words(self) -> bool {
        self != TaskKind::Length
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown task `{s}`")))
    }
}

/// Inclusive word-count ranges used as length classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthBins(Vec<(usize, usize)>);

impl Default for LengthBins {
    fn default() -> Self {
        LengthBins(vec![(5, 8), (9, 12), (13, 16), (17, 20), (21, 25), (26, 29), (30, 33), (34, 70)])
    }
}

impl LengthBins {
    /// Bins must be contiguous and cover `MIN_LEN..=MAX_LEN`.
    pub fn new(bins: Vec<(usize, usize)>) -> Result<Self> {
        let ok = !bins.is_empty()
            && bins[0].0 == MIN_LEN
            && bins.last().unwrap().1 == MAX_LEN
            && bins.iter().all(|(lo, hi)| lo <= hi)
            && bins.windows(2).all(|w| w[1].0 == w[0].1 + 1);
        if !ok {
            return Err(Error::config(format!("length bins {bins:?} do not tile {MIN_LEN}..={MAX_LEN}")));
        }
        Ok(LengthBins(bins))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bins(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn bin(&self, n: usize) -> Result<usize> {
        self.0
            .iter()
            .position(|&(lo, hi)| (lo..=hi).contains(&n))
            .ok_or_else(|| Error::data(format!("sentence length {n} outside {MIN_LEN}..={MAX_LEN}")))
    }
}

/// Length class of an `n`-word sentence under the default bins.
pub fn bin_length(n: usize) -> Result<usize> {
    LengthBins::default().bin(n)
}

/// Everything needed to rebuild one instance from an encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub task: TaskKind,
    pub label: usize,
    pub sent_id: u64,
    /// Token ids in input order.
    pub words: Vec<usize>,
    /// Positions of `words` in the sentence.
    pub positions: Vec<usize>,
    /// Sentence word count.
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub input: Vec<f64>,
    pub label: usize,
    pub meta: InstanceMeta,
}

/// Sentences left out of a dataset and why.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub skipped: Vec<(u64, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub task: TaskKind,
    pub num_classes: usize,
    pub sentence_dim: usize,
    pub word_dim: usize,
    pub seed: u64,
    pub encoder_digest: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task: TaskKind,
    pub instances: Vec<TaskInstance>,
    pub num_classes: usize,
    pub sentence_dim: usize,
    pub word_dim: usize,
    pub seed: u64,
    pub encoder_digest: String,
    pub report: GenerationReport,
}

/// Sampled instance metadata plus the skip report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sampled {
    pub task: TaskKind,
    pub seed: u64,
    pub metas: Vec<InstanceMeta>,
    pub report: GenerationReport,
}

fn ordered(sentences: &[Sentence]) -> Vec<&Sentence> {
    let mut v: Vec<&Sentence> = sentences.iter().collect();
    v.sort_by_key(|s| s.source_id);
    v
}

pub fn sample_length(sentences: &[Sentence]) -> Result<Sampled> {
    let metas = ordered(sentences)
        .into_iter()
        .map(|s| {
            Ok(InstanceMeta {
                task: TaskKind::Length,
                label: bin_length(s.len())?,
                sent_id: s.source_id,
                words: vec![],
                positions: vec![],
                len: s.len(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Sampled { task: TaskKind::Length, seed: 0, metas, report: GenerationReport::default() })
}

/// One positive (a word of the sentence) and one negative (a word that is a
/// positive elsewhere but absent here) per sentence.
pub fn sample_content(sentences: &[Sentence], seed: u64) -> Result<Sampled> {
    let sents = ordered(sentences);
    let pos_seed = rng::derive_seed_str(seed, "content.positive");
    let neg_seed = rng::derive_seed_str(seed, "content.negative");

    let mut positives = Vec::with_capacity(sents.len());
    for s in &sents {
        let distinct: Vec<usize> = s.tokens.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if distinct.is_empty() {
            return Err(Error::data(format!("sentence {} is empty", s.source_id)));
        }
        let w = distinct[rng::stream(pos_seed, s.source_id).gen_range(0..distinct.len())];
        positives.push(w);
    }
    // A sentence whose tokens cover the pool has no negative and is dropped,
    // which removes its positive from the pool; repeat until stable so every
    // negative is a positive of some emitted instance.
    let mut kept = vec![true; sents.len()];
    let mut report = GenerationReport::default();
    let pool = loop {
        let pool: BTreeSet<usize> = positives
            .iter()
            .zip(&kept)
            .filter_map(|(&w, &k)| k.then_some(w))
            .collect();
        let mut changed = false;
        for (i, s) in sents.iter().enumerate() {
            if kept[i] && s.tokens.iter().copied().collect::<BTreeSet<_>>().is_superset(&pool) {
                kept[i] = false;
                changed = true;
                report.skipped.push((s.source_id, "sentence covers the whole positive pool".into()));
            }
        }
        if !changed {
            break pool;
        }
    };
    report.skipped.sort();

    let mut metas = Vec::with_capacity(2 * sents.len());
    for ((s, &pos), _) in sents.iter().zip(&positives).zip(&kept).filter(|(_, &k)| k) {
        let own: BTreeSet<usize> = s.tokens.iter().copied().collect();
        let candidates: Vec<usize> = pool.difference(&own).copied().collect();
        let neg = candidates[rng::stream(neg_seed, s.source_id).gen_range(0..candidates.len())];
        let at = s.tokens.iter().position(|&t| t == pos).expect("positive is in sentence");
        metas.push(InstanceMeta {
            task: TaskKind::Content,
            label: 1,
            sent_id: s.source_id,
            words: vec![pos],
            positions: vec![at],
            len: s.len(),
        });
        metas.push(InstanceMeta {
            task: TaskKind::Content,
            label: 0,
            sent_id: s.source_id,
            words: vec![neg],
            positions: vec![],
            len: s.len(),
        });
    }
    Ok(Sampled { task: TaskKind::Content, seed, metas, report })
}

/// Two positions holding distinct tokens, in sentence order (label 1) and
/// swapped (label 0). `task` selects whether the sentence vector is part of
/// the input; sampling is identical for both.
pub fn sample_order(sentences: &[Sentence], seed: u64, task: TaskKind) -> Result<Sampled> {
    if !matches!(task, TaskKind::Order | TaskKind::OrderNoSentence) {
        return Err(Error::config(format!("{task} is not an order task")));
    }
    let pair_seed = rng::derive_seed_str(seed, "order.pair");
    let mut metas = Vec::with_capacity(2 * sentences.len());
    let mut report = GenerationReport::default();
    for s in ordered(sentences) {
        let t = &s.tokens;
        let pairs: Vec<(usize, usize)> = (0..t.len())
            .flat_map(|a| (a + 1..t.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| t[a] != t[b])
            .collect();
        if pairs.is_empty() {
            report.skipped.push((s.source_id, "fewer than two distinct tokens".into()));
            continue;
        }
        let (a, b) = pairs[rng::stream(pair_seed, s.source_id).gen_range(0..pairs.len())];
        for (label, first, second) in [(1, a, b), (0, b, a)] {
            metas.push(InstanceMeta {
                task,
                label,
                sent_id: s.source_id,
                words: vec![t[first], t[second]],
                positions: vec![first, second],
                len: s.len(),
            });
        }
    }
    Ok(Sampled { task, seed, metas, report })
}

pub fn sample(task: TaskKind, sentences: &[Sentence], seed: u64) -> Result<Sampled> {
    match task {
        TaskKind::Length => sample_length(sentences),
        TaskKind::Content => sample_content(sentences, seed),
        TaskKind::Order | TaskKind::OrderNoSentence => sample_order(sentences, seed, task),
    }
}

/// Builds input vectors for sampled metadata.
pub fn assemble(
    sampled: &Sampled,
    sentences: &[Sentence],
    encoder: &dyn SentenceEncoder,
    encoder_digest: &str,
) -> Result<TaskDataset> {
    let task = sampled.task;
    let (k, d) = (encoder.sentence_dim(), encoder.word_dim());
    if task.needs_words() && d == 0 {
        return Err(Error::data(format!("{task} task needs word vectors but the encoder has none")));
    }
    let by_id: HashMap<u64, &Sentence> = sentences.iter().map(|s| (s.source_id, s)).collect();
    let mut cache: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut instances = Vec::with_capacity(sampled.metas.len());
    for m in &sampled.metas {
        let mut input = Vec::with_capacity(task.input_dim(k, d));
        if task != TaskKind::OrderNoSentence {
            let s = match cache.get(&m.sent_id) {
                Some(v) => v.clone(),
                None => {
                    let sent = by_id
                        .get(&m.sent_id)
                        .ok_or_else(|| Error::data(format!("instance names unknown sentence {}", m.sent_id)))?;
                    let v = encoder.encode(sent)?;
                    if v.len() != k {
                        return Err(Error::dim(format!(
                            "encoder returned a {}-dim sentence vector, expected {k}",
                            v.len()
                        )));
                    }
                    cache.insert(m.sent_id, v.clone());
                    v
                }
            };
            input.extend_from_slice(&s);
        }
        for &w in &m.words {
            let v = encoder.word_vector(w)?;
            if v.len() != d {
                return Err(Error::dim(format!("encoder returned a {}-dim word vector, expected {d}", v.len())));
            }
            input.extend_from_slice(&v);
        }
        instances.push(TaskInstance { input, label: m.label, meta: m.clone() });
    }
    Ok(TaskDataset {
        task,
        instances,
        num_classes: task.num_classes(),
        sentence_dim: k,
        word_dim: d,
        seed: sampled.seed,
        encoder_digest: encoder_digest.to_owned(),
        report: sampled.report.clone(),
    })
}

pub fn gen_length_task(sentences: &[Sentence], encoder: &dyn SentenceEncoder) -> Result<TaskDataset> {
    assemble(&sample_length(sentences)?, sentences, encoder, "")
}

pub fn gen_content_task(sentences: &[Sentence], encoder: &dyn SentenceEncoder, seed: u64) -> Result<TaskDataset> {
    assemble(&sample_content(sentences, seed)?, sentences, encoder, "")
}

pub fn gen_order_task(sentences: &[Sentence], encoder: &dyn SentenceEncoder, seed: u64) -> Result<TaskDataset> {
    assemble(&sample_order(sentences, seed, TaskKind::Order)?, sentences, encoder, "")
}

pub fn gen_order_task_no_sentence(
    sentences: &[Sentence],
    encoder: &dyn SentenceEncoder,
    seed: u64,
) -> Result<TaskDataset> {
    assemble(&sample_order(sentences, seed, TaskKind::OrderNoSentence)?, sentences, encoder, "")
}

impl TaskDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.task.input_dim(self.sentence_dim, self.word_dim)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            task: self.task,
            num_classes: self.num_classes,
            sentence_dim: self.sentence_dim,
            word_dim: self.word_dim,
            seed: self.seed,
            encoder_digest: self.encoder_digest.clone(),
            n: self.instances.len(),
        }
    }

    /// Header line followed by one metadata line per instance; inputs are not stored.
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer(&mut *w, &self.header())?;
        writeln!(w)?;
        for i in &self.instances {
            serde_json::to_writer(&mut *w, &i.meta)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Same data with labels permuted uniformly at random; inputs stay put.
    pub fn with_shuffled_labels(&self, seed: u64) -> TaskDataset {
        use rand::seq::SliceRandom;
        let mut labels = self.labels();
        labels.shuffle(&mut rng::seeded(seed));
        let mut out = self.clone();
        for (inst, l) in out.instances.iter_mut().zip(labels) {
            inst.label = l;
            inst.meta.label = l;
        }
        out
    }
}

/// Reads a dataset file back into its header and sampled metadata.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<(DatasetHeader, Sampled)> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })??;
    let header: DatasetHeader =
        serde_json::from_str(&first).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    let mut metas = Vec::with_capacity(header.n);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let m: InstanceMeta =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        if m.task != header.task {
            return Err(Error::Parse { line: i + 2, msg: "instance task differs from header".into() });
        }
        metas.push(m);
    }
    if metas.len() != header.n {
        return Err(Error::data(format!("header announces {} instances, found {}", header.n, metas.len())));
    }
    let seed = header.seed;
    let task = header.task;
    Ok((header, Sampled { task, seed, metas, report: GenerationReport::default() }))
}
