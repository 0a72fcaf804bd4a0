//! The experiment stages. Each stage reads the previous stage's artifacts
//! from the output directory, checks them against the manifest, and skips
//! work whose inputs have not changed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sentprobe::corpus::{
    build_vocab, filter_lengths, permute_corpus, read_lines, split_corpus, synthetic_corpus, CorpusSplit, Sentence,
    SplitManifest, Vocabulary,
};
use sentprobe::encoders::{
    load_external_embeddings, skipgram_train, CbowEncoder, EdModel, EdTrainer, ExternalEncoder, SentenceEncoder,
    SkipGramModel,
};
use sentprobe::eval::{
    bleu, content_accuracy_by_length, emit_report, norm_length_curve, paired_t_test, paper_reference, spearman,
    CurvePoint, ReportRow, DEFAULT_MAX_N,
};
use sentprobe::nncore::Checkpoint;
use sentprobe::probe::{majority_class, probe_eval, probe_train};
use sentprobe::rng::{self, derive_seed_str};
use sentprobe::tasks::{assemble, sample, LengthBins, TaskDataset, TaskKind};

use crate::config::{EncoderSpec, ExperimentConfig};
use crate::manifest::{file_digest, key_of, RunManifest};
use crate::{CliError, CliResult, Elapsed};

#[derive(Debug, Clone)]
pub struct Options {
    pub jobs: usize,
    pub quiet: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { jobs: 1, quiet: false }
    }
}

impl Options {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| CliError::Missing(format!("cannot start worker pool: {e}")))
    }
}

const PREPARE: &str = "prepare";
const TASKS: &str = "tasks";
const REPORT: &str = "report";
const VOCAB_FILE: &str = "prepare/vocab.tsv";
const CORPUS_FILE: &str = "prepare/corpus.jsonl";
const VALIDATION_FILE: &str = "prepare/validation.jsonl";
const SPLIT_FILE: &str = "prepare/split.json";
const PREPARE_REPORT: &str = "prepare/summary.json";

fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(p) = path.parent() {
        ensure_dir(p)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn write_sentences(path: &Path, sentences: &[Sentence]) -> CliResult<()> {
    let mut buf = Vec::new();
    for s in sentences {
        serde_json::to_writer(&mut buf, s)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

fn read_sentences(path: &Path) -> CliResult<Vec<Sentence>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::Core(sentprobe::Error::Parse { line: i + 1, msg: format!("{}: {e}", path.display()) })
        })?);
    }
    Ok(out)
}

fn config_digest(cfg: &ExperimentConfig) -> String {
    crate::sha256_hex(cfg.canonical_json().as_bytes())
}

fn manifest(cfg: &ExperimentConfig) -> CliResult<RunManifest> {
    ensure_dir(&cfg.out)?;
    RunManifest::load_or_new(&cfg.out, &config_digest(cfg), cfg.seed)
}

// ---------------------------------------------------------------- prepare

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub lines: usize,
    pub kept_by_length: usize,
    pub encoder_train: usize,
    pub validation: usize,
    pub vocab_size: usize,
    pub split: [usize; 3],
}

fn prepare_key(cfg: &ExperimentConfig) -> CliResult<String> {
    let settings = json!({
        "seed": cfg.seed,
        "pretokenized": cfg.pretokenized,
        "max_sentences": cfg.max_sentences,
        "validation": cfg.validation,
        "vocab_cap": cfg.vocab_cap,
        "min_len": cfg.min_len,
        "max_len": cfg.max_len,
        "split": cfg.split,
    });
    Ok(key_of(&[("settings", &settings.to_string()), ("corpus", &file_digest(&cfg.corpus)?)]))
}

/// Tokenizes and filters the corpus, builds the vocabulary, holds out a
/// validation set, and draws the probe split from the encoder training set.
pub fn cmd_prepare(cfg: &ExperimentConfig, opts: &Options) -> CliResult<PrepareSummary> {
    let out = &cfg.out;
    let mut m = manifest(cfg)?;
    let key = prepare_key(cfg)?;
    if m.is_fresh(out, PREPARE, &key) {
        opts.log("prepare: up to date");
        return Ok(serde_json::from_slice(&fs::read(out.join(PREPARE_REPORT))?)?);
    }
    let t0 = Instant::now();
    let lines = read_lines(BufReader::new(File::open(&cfg.corpus)?), cfg.pretokenized)?;
    let n_lines = lines.len();
    let kept = filter_lengths(lines, cfg.min_len, cfg.max_len, |(_, t)| t.len())?;
    let n_kept = kept.len();
    let need = cfg.validation + cfg.split.iter().sum::<usize>();
    if n_kept < need {
        return Err(CliError::Core(sentprobe::Error::Data(format!(
            "corpus has {n_kept} sentences of length {}..={}, need at least {need}",
            cfg.min_len, cfg.max_len
        ))));
    }
    let mut idx: Vec<usize> = (0..n_kept).collect();
    idx.shuffle(&mut rng::seeded(derive_seed_str(cfg.seed, "validation")));
    let mut val_idx: Vec<usize> = idx[..cfg.validation].to_vec();
    let mut train_idx: Vec<usize> = idx[cfg.validation..].iter().copied().take(cfg.max_sentences).collect();
    val_idx.sort_unstable();
    train_idx.sort_unstable();

    let train_tokens: Vec<Vec<&str>> =
        train_idx.iter().map(|&i| kept[i].1.iter().map(String::as_str).collect()).collect();
    let vocab = build_vocab(&train_tokens, cfg.vocab_cap)?;
    let encode = |ids: &[usize]| -> Vec<Sentence> {
        ids.iter().map(|&i| Sentence::from_tokens(kept[i].0, &kept[i].1, &vocab)).collect()
    };
    let train = encode(&train_idx);
    let validation = encode(&val_idx);
    let split = split_corpus(&train, cfg.split[0], cfg.split[1], cfg.split[2], derive_seed_str(cfg.seed, "split"))?;

    let mut vbuf = Vec::new();
    vocab.write_tsv(&mut vbuf)?;
    write_atomic(&out.join(VOCAB_FILE), &vbuf)?;
    write_sentences(&out.join(CORPUS_FILE), &train)?;
    write_sentences(&out.join(VALIDATION_FILE), &validation)?;
    write_atomic(&out.join(SPLIT_FILE), &serde_json::to_vec(&split.manifest(derive_seed_str(cfg.seed, "split")))?)?;
    let summary = PrepareSummary {
        lines: n_lines,
        kept_by_length: n_kept,
        encoder_train: train.len(),
        validation: validation.len(),
        vocab_size: vocab.len(),
        split: cfg.split,
    };
    write_atomic(&out.join(PREPARE_REPORT), &serde_json::to_vec_pretty(&summary)?)?;
    let files: Vec<String> =
        [VOCAB_FILE, CORPUS_FILE, VALIDATION_FILE, SPLIT_FILE, PREPARE_REPORT].iter().map(|s| s.to_string()).collect();
    m.record(out, PREPARE, &key, &files, t0.elapsed().as_secs_f64())?;
    m.save(out)?;
    opts.log(format!(
        "prepare: {n_lines} lines, {n_kept} within length bounds, vocab {}, {}",
        vocab.len(),
        Elapsed(t0.elapsed().as_secs_f64())
    ));
    Ok(summary)
}

/// Prepared corpus artifacts.
pub struct Prepared {
    pub vocab: Vocabulary,
    pub train: Vec<Sentence>,
    pub validation: Vec<Sentence>,
    pub split: CorpusSplit,
}

fn load_prepared(cfg: &ExperimentConfig, m: &RunManifest) -> CliResult<Prepared> {
    m.verify(&cfg.out, PREPARE)
        .map_err(|e| CliError::Missing(format!("{e}; run `prepare` first")))?;
    let out = &cfg.out;
    let vocab = Vocabulary::read_tsv(BufReader::new(File::open(out.join(VOCAB_FILE))?))?;
    let train = read_sentences(&out.join(CORPUS_FILE))?;
    let validation = read_sentences(&out.join(VALIDATION_FILE))?;
    let sm: SplitManifest = serde_json::from_slice(&fs::read(out.join(SPLIT_FILE))?)?;
    let split = CorpusSplit::from_manifest(&sm, &train)?;
    Ok(Prepared { vocab, train, validation, split })
}

// ---------------------------------------------------------------- encoders

/// One trained (or loaded) encoder: a spec at one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderInstance {
    pub name: String,
    pub spec: EncoderSpec,
    pub dim: Option<usize>,
}

impl EncoderInstance {
    pub fn kind(&self) -> &'static str {
        self.spec.kind()
    }

    fn ckpt_file(&self) -> String {
        format!("encoders/{}.ckpt", self.name)
    }

    fn info_file(&self) -> String {
        format!("encoders/{}.json", self.name)
    }

    fn curve_file(&self) -> String {
        format!("encoders/{}.curve.csv", self.name)
    }

    fn stage(&self) -> String {
        format!("encoder:{}", self.name)
    }
}

pub fn encoder_instances(cfg: &ExperimentConfig) -> Vec<EncoderInstance> {
    let externals = cfg.encoders.iter().filter(|e| e.kind() == "external").count();
    let mut ext_i = 0;
    let mut v = Vec::new();
    for spec in &cfg.encoders {
        match spec {
            EncoderSpec::Cbow { dims } | EncoderSpec::Ed { dims } => {
                for &d in dims {
                    v.push(EncoderInstance { name: format!("{}-{d}", spec.kind()), spec: spec.clone(), dim: Some(d) });
                }
            }
            EncoderSpec::External { .. } => {
                let name = if externals == 1 { "external".to_string() } else { format!("external{ext_i}") };
                ext_i += 1;
                v.push(EncoderInstance { name, spec: spec.clone(), dim: None });
            }
        }
    }
    v.dedup_by(|a, b| a.name == b.name);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderInfo {
    pub name: String,
    pub kind: String,
    pub dim: usize,
    pub checkpoint_digest: String,
    pub bleu: Option<f64>,
    pub epochs: usize,
}

fn encoder_key(cfg: &ExperimentConfig, m: &RunManifest, inst: &EncoderInstance) -> CliResult<String> {
    let prep = |f: &str| m.digest_of(PREPARE, f).unwrap_or("").to_string();
    let settings = match &inst.spec {
        EncoderSpec::Cbow { .. } => serde_json::to_string(&cfg.skipgram_config(inst.dim.unwrap_or(0)).seed)?
            + &serde_json::to_string(&cfg.skipgram)?,
        EncoderSpec::Ed { .. } => serde_json::to_string(&cfg.ed)? + &cfg.seed.to_string(),
        EncoderSpec::External { sentences, words, permuted } => {
            let mut s = file_digest(sentences)?;
            for p in [words, permuted].into_iter().flatten() {
                s += &file_digest(p)?;
            }
            s
        }
    };
    Ok(key_of(&[
        ("name", &inst.name),
        ("settings", &settings),
        ("vocab", &prep(VOCAB_FILE)),
        ("corpus", &prep(CORPUS_FILE)),
        ("validation", &prep(VALIDATION_FILE)),
    ]))
}

struct Trained {
    stage: String,
    key: String,
    files: Vec<String>,
    seconds: f64,
}

fn write_curve(path: &Path, header: &str, rows: &[String]) -> CliResult<()> {
    let mut buf = format!("{header}\n");
    for r in rows {
        buf.push_str(r);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

fn train_one(cfg: &ExperimentConfig, prep: &Prepared, inst: &EncoderInstance, key: &str, opts: &Options) -> CliResult<Trained> {
    let out = &cfg.out;
    let t0 = Instant::now();
    ensure_dir(&out.join("encoders"))?;
    let (info, files) = match &inst.spec {
        EncoderSpec::Cbow { .. } => {
            let dim = inst.dim.expect("cbow has a dim");
            let model = skipgram_train(&prep.train, &prep.vocab, &cfg.skipgram_config(dim))?;
            let ckpt = model.to_checkpoint();
            ckpt.save(out.join(inst.ckpt_file()))?;
            let rows: Vec<String> =
                model.epoch_losses.iter().enumerate().map(|(e, l)| format!("{},{}", e + 1, l)).collect();
            write_curve(&out.join(inst.curve_file()), "epoch,loss", &rows)?;
            let info = EncoderInfo {
                name: inst.name.clone(),
                kind: "cbow".into(),
                dim,
                checkpoint_digest: ckpt.digest(),
                bleu: None,
                epochs: cfg.skipgram.epochs,
            };
            (info, vec![inst.ckpt_file(), inst.curve_file()])
        }
        EncoderSpec::Ed { .. } => {
            let dim = inst.dim.expect("ed has a dim");
            let ed_cfg = cfg.ed_config(dim);
            let state_path = out.join(format!("encoders/{}.state.ckpt", inst.name));
            let key_path = out.join(format!("encoders/{}.state.key", inst.name));
            let resumable = state_path.is_file() && fs::read_to_string(&key_path).map(|k| k == key).unwrap_or(false);
            let mut trainer = if resumable {
                let t = EdTrainer::from_state_checkpoint(&Checkpoint::load(&state_path)?, ed_cfg)?;
                opts.log(format!("{}: resuming after epoch {}", inst.name, t.history().len()));
                t
            } else {
                EdTrainer::new(prep.vocab.len(), ed_cfg)?
            };
            write_atomic(&key_path, key.as_bytes())?;
            while !trainer.is_done() {
                let st = trainer.run_epoch(&prep.train, &prep.validation)?;
                trainer.state_checkpoint().save(&state_path)?;
                opts.log(format!(
                    "{}: epoch {} train loss {:.4} dev loss {:.4} dev acc {:.3}",
                    inst.name,
                    st.epoch + 1,
                    st.train_loss,
                    st.dev_loss,
                    st.dev_accuracy
                ));
            }
            let (model, history) = trainer.finish();
            let ckpt = model.to_checkpoint();
            ckpt.save(out.join(inst.ckpt_file()))?;
            let rows: Vec<String> = history
                .iter()
                .map(|h| format!("{},{},{},{},{}", h.epoch + 1, h.train_loss, h.train_accuracy, h.dev_loss, h.dev_accuracy))
                .collect();
            write_curve(&out.join(inst.curve_file()), "epoch,train_loss,train_accuracy,dev_loss,dev_accuracy", &rows)?;
            let refs: Vec<Vec<usize>> = prep.validation.iter().map(|s| s.tokens.clone()).collect();
            let cands =
                prep.validation.iter().map(|s| model.reconstruct(&s.tokens, cfg.max_len)).collect::<Result<Vec<_>, _>>()?;
            let b = bleu(&cands, &refs, DEFAULT_MAX_N)?;
            let info = EncoderInfo {
                name: inst.name.clone(),
                kind: "ed".into(),
                dim,
                checkpoint_digest: ckpt.digest(),
                bleu: Some(b.score),
                epochs: history.len(),
            };
            fs::remove_file(&state_path).ok();
            fs::remove_file(&key_path).ok();
            (info, vec![inst.ckpt_file(), inst.curve_file()])
        }
        EncoderSpec::External { sentences, words, .. } => {
            let set = load_external_embeddings(sentences, words.as_deref())?;
            let info = EncoderInfo {
                name: inst.name.clone(),
                kind: "external".into(),
                dim: set.sentence_dim,
                checkpoint_digest: file_digest(sentences)?,
                bleu: None,
                epochs: 0,
            };
            (info, vec![])
        }
    };
    write_atomic(&out.join(inst.info_file()), &serde_json::to_vec_pretty(&info)?)?;
    let mut files = files;
    files.push(inst.info_file());
    let seconds = t0.elapsed().as_secs_f64();
    opts.log(format!("{}: trained in {}", inst.name, Elapsed(seconds)));
    Ok(Trained { stage: inst.stage(), key: key.to_string(), files, seconds })
}

/// Trains every configured encoder (or only `only`, by instance name such
/// as `ed-32`). Finished encoders with unchanged inputs are skipped; an
/// interrupted encoder-decoder resumes from its last epoch.
pub fn cmd_train_encoder(cfg: &ExperimentConfig, opts: &Options, only: Option<&str>) -> CliResult<Vec<EncoderInfo>> {
    let mut m = manifest(cfg)?;
    let prep = load_prepared(cfg, &m)?;
    let all = encoder_instances(cfg);
    let selected: Vec<&EncoderInstance> = match only {
        Some(name) => {
            let v: Vec<_> = all.iter().filter(|i| i.name == name).collect();
            if v.is_empty() {
                let names: Vec<&str> = all.iter().map(|i| i.name.as_str()).collect();
                return Err(CliError::Config { line: None, msg: format!("no encoder named `{name}` (have {names:?})") });
            }
            v
        }
        None => all.iter().collect(),
    };
    let mut todo = Vec::new();
    for inst in &selected {
        let key = encoder_key(cfg, &m, inst)?;
        if m.is_fresh(&cfg.out, &inst.stage(), &key) {
            opts.log(format!("{}: up to date", inst.name));
        } else {
            todo.push((*inst, key));
        }
    }
    let results: Vec<CliResult<Trained>> =
        opts.pool()?.install(|| todo.par_iter().map(|(inst, key)| train_one(cfg, &prep, inst, key, opts)).collect());
    for r in results {
        let t = r?;
        m.record(&cfg.out, &t.stage, &t.key, &t.files, t.seconds)?;
    }
    m.save(&cfg.out)?;
    selected.iter().map(|i| load_info(cfg, i)).collect()
}

fn load_info(cfg: &ExperimentConfig, inst: &EncoderInstance) -> CliResult<EncoderInfo> {
    Ok(serde_json::from_slice(&fs::read(cfg.out.join(inst.info_file()))?)?)
}

fn load_encoder(
    cfg: &ExperimentConfig,
    inst: &EncoderInstance,
    vocab: &Vocabulary,
    permuted: bool,
) -> CliResult<Option<Box<dyn SentenceEncoder>>> {
    let path = cfg.out.join(inst.ckpt_file());
    Ok(match &inst.spec {
        EncoderSpec::Cbow { .. } => {
            Some(Box::new(CbowEncoder::from_skipgram(&SkipGramModel::from_checkpoint(&Checkpoint::load(path)?)?)))
        }
        EncoderSpec::Ed { .. } => Some(Box::new(EdModel::from_checkpoint(&Checkpoint::load(path)?)?)),
        EncoderSpec::External { sentences, words, permuted: perm } => {
            let file = if permuted { perm.as_ref() } else { Some(sentences) };
            match file {
                Some(f) => Some(Box::new(ExternalEncoder::new(load_external_embeddings(f, words.as_deref())?, vocab))),
                None => None,
            }
        }
    })
}

// ---------------------------------------------------------------- tasks

/// Corpus variant a probing cell runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Permuted,
    Synthetic,
}

impl Variant {
    fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Permuted => "permuted",
            Variant::Synthetic => "synthetic",
        }
    }
}

/// Task and corpus variant; `label` is what the report's task column shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskVariant {
    pub task: TaskKind,
    pub variant: Variant,
}

impl TaskVariant {
    pub fn label(&self) -> String {
        match self.variant {
            Variant::Original => self.task.name().to_string(),
            v => format!("{}:{}", self.task.name(), v.name()),
        }
    }
}

pub fn task_variants(cfg: &ExperimentConfig) -> Vec<TaskVariant> {
    let mut v: Vec<TaskVariant> = cfg.tasks.iter().map(|&task| TaskVariant { task, variant: Variant::Original }).collect();
    if cfg.controls.order_no_sentence && cfg.tasks.contains(&TaskKind::Order) {
        v.push(TaskVariant { task: TaskKind::OrderNoSentence, variant: Variant::Original });
    }
    if cfg.controls.permuted {
        v.extend(cfg.tasks.iter().map(|&task| TaskVariant { task, variant: Variant::Permuted }));
    }
    if cfg.controls.synthetic && cfg.tasks.contains(&TaskKind::Length) {
        v.push(TaskVariant { task: TaskKind::Length, variant: Variant::Synthetic });
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: String,
    pub task: String,
    pub encoder: String,
    pub kind: String,
    pub dim: usize,
    pub n: usize,
    pub accuracy: f64,
    pub baseline: f64,
    pub encoder_digest: String,
    pub probe_digest: String,
    pub correct_digest: String,
    pub bits_digest: String,
    pub probe_epochs: usize,
    pub best_epoch: usize,
    /// Sentences skipped during generation, per split part.
    pub skipped: [usize; 3],
    pub by_length: Vec<CurvePoint>,
    pub key: String,
}

fn cell_name(inst: &EncoderInstance, tv: &TaskVariant) -> String {
    match tv.variant {
        Variant::Original => format!("{}.{}", inst.name, tv.task.name()),
        v => format!("{}.{}.{}", inst.name, tv.task.name(), v.name()),
    }
}

fn bits_to_text(bits: &[u8]) -> Vec<u8> {
    bits.iter().map(|&b| b'0' + b).collect()
}

pub fn read_bits(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path)?
        .into_iter()
        .map(|c| match c {
            b'0' | b'1' => Ok(c - b'0'),
            _ => Err(CliError::Missing(format!("{} is not a correctness bit file", path.display()))),
        })
        .collect()
}

struct Corpora {
    original: CorpusSplit,
    permuted: CorpusSplit,
    synthetic: Option<CorpusSplit>,
}

impl Corpora {
    fn get(&self, v: Variant) -> &CorpusSplit {
        match v {
            Variant::Original => &self.original,
            Variant::Permuted => &self.permuted,
            Variant::Synthetic => self.synthetic.as_ref().expect("synthetic split built when enabled"),
        }
    }
}

fn build_corpora(cfg: &ExperimentConfig, prep: &Prepared) -> CliResult<Corpora> {
    let permuted = prep.split.map(|p| permute_corpus(p, derive_seed_str(cfg.seed, "permute")));
    let synthetic = if cfg.controls.synthetic {
        let seed = derive_seed_str(cfg.seed, "synthetic");
        let parts = prep
            .split
            .parts()
            .map(|(_, p)| synthetic_corpus(p, &prep.vocab, seed));
        let [a, b, c] = parts;
        Some(CorpusSplit { train: a?, dev: b?, test: c? })
    } else {
        None
    };
    Ok(Corpora { original: prep.split.clone(), permuted, synthetic })
}

fn task_seed(cfg: &ExperimentConfig, task: TaskKind, part: &str) -> u64 {
    // the no-sentence order variant reuses the order task's pairs
    let t = if task == TaskKind::OrderNoSentence { TaskKind::Order } else { task };
    derive_seed_str(cfg.seed, &format!("task.{}.{part}", t.name()))
}

fn cell_key(cfg: &ExperimentConfig, m: &RunManifest, inst: &EncoderInstance, cell: &str) -> CliResult<String> {
    let enc_digest = m.stages.get(&inst.stage()).map(|s| s.key.clone()).unwrap_or_default();
    Ok(key_of(&[
        ("cell", cell),
        ("encoder", &enc_digest),
        ("split", m.digest_of(PREPARE, SPLIT_FILE).unwrap_or("")),
        ("probe", &serde_json::to_string(&cfg.probe)?),
        ("seed", &cfg.seed.to_string()),
    ]))
}

fn cell_files(cell: &str) -> [String; 3] {
    [format!("cells/{cell}.json"), format!("cells/{cell}.bits"), format!("cells/{cell}.probe.ckpt")]
}

fn cached_cell(out: &Path, cell: &str, key: &str) -> Option<CellResult> {
    let [json, bits, _] = cell_files(cell);
    let r: CellResult = serde_json::from_slice(&fs::read(out.join(json)).ok()?).ok()?;
    (r.key == key && file_digest(&out.join(bits)).ok()? == r.bits_digest).then_some(r)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &ExperimentConfig,
    inst: &EncoderInstance,
    info: &EncoderInfo,
    encoder: &dyn SentenceEncoder,
    tv: &TaskVariant,
    split: &CorpusSplit,
    cell: &str,
    key: &str,
) -> CliResult<CellResult> {
    let out = &cfg.out;
    let parts = split.parts();
    let mut data: Vec<TaskDataset> = Vec::with_capacity(3);
    for (name, sentences) in parts {
        let sampled = sample(tv.task, sentences, task_seed(cfg, tv.task, name))?;
        data.push(assemble(&sampled, sentences, encoder, &info.checkpoint_digest)?);
    }
    let outcome = probe_train(&data[0], &data[1], &cfg.probe_config(cell))?;
    let eval = probe_eval(&outcome.model, &data[2])?;
    let (_, baseline) = majority_class(&data[2]);
    let by_length = if tv.task == TaskKind::Content {
        content_accuracy_by_length(&eval.correct, &data[2], &LengthBins::default())?
    } else {
        Vec::new()
    };
    let [json_f, bits_f, probe_f] = cell_files(cell);
    let probe_ckpt = outcome.model.to_checkpoint();
    probe_ckpt.save(out.join(&probe_f))?;
    let bits = bits_to_text(&eval.correct);
    write_atomic(&out.join(&bits_f), &bits)?;
    let result = CellResult {
        cell: cell.to_string(),
        task: tv.label(),
        encoder: inst.name.clone(),
        kind: info.kind.clone(),
        dim: info.dim,
        n: data[2].len(),
        accuracy: eval.accuracy,
        baseline,
        encoder_digest: info.checkpoint_digest.clone(),
        probe_digest: probe_ckpt.digest(),
        correct_digest: eval.correct_digest(),
        bits_digest: crate::sha256_hex(&bits),
        probe_epochs: outcome.dev_losses.len(),
        best_epoch: outcome.best_epoch,
        skipped: [0, 1, 2].map(|i| data[i].report.skipped.len()),
        by_length,
        key: key.to_string(),
    };
    write_atomic(&out.join(&json_f), &serde_json::to_vec_pretty(&result)?)?;
    Ok(result)
}

/// Runs every (encoder, task, control variant) cell: generates the task
/// data, trains and evaluates a probe, and stores per-instance correctness.
pub fn cmd_run_tasks(cfg: &ExperimentConfig, opts: &Options) -> CliResult<Vec<CellResult>> {
    let mut m = manifest(cfg)?;
    let prep = load_prepared(cfg, &m)?;
    let instances = encoder_instances(cfg);
    for inst in &instances {
        m.verify(&cfg.out, &inst.stage()).map_err(|e| {
            CliError::Missing(format!("encoder {} is not trained ({e}); run `train-encoder` first", inst.name))
        })?;
    }
    let corpora = build_corpora(cfg, &prep)?;
    let variants = task_variants(cfg);
    ensure_dir(&cfg.out.join("cells"))?;
    let t0 = Instant::now();

    let mut jobs = Vec::new();
    for inst in &instances {
        let info = load_info(cfg, inst)?;
        for tv in &variants {
            if inst.kind() == "external" && tv.variant == Variant::Synthetic {
                continue;
            }
            let cell = cell_name(inst, tv);
            let key = cell_key(cfg, &m, inst, &cell)?;
            jobs.push((inst, info.clone(), *tv, cell, key));
        }
    }
    let results: Vec<CliResult<Option<CellResult>>> = opts.pool()?.install(|| {
        jobs.par_iter()
            .map(|(inst, info, tv, cell, key)| {
                if let Some(r) = cached_cell(&cfg.out, cell, key) {
                    opts.log(format!("{cell}: up to date"));
                    return Ok(Some(r));
                }
                let Some(encoder) = load_encoder(cfg, inst, &prep.vocab, tv.variant == Variant::Permuted)? else {
                    return Ok(None);
                };
                let t = Instant::now();
                let r = run_cell(cfg, inst, info, encoder.as_ref(), tv, corpora.get(tv.variant), cell, key)?;
                opts.log(format!(
                    "{cell}: accuracy {:.4} (baseline {:.4}, n {}) in {}",
                    r.accuracy,
                    r.baseline,
                    r.n,
                    Elapsed(t.elapsed().as_secs_f64())
                ));
                Ok(Some(r))
            })
            .collect()
    });
    let mut cells = Vec::new();
    for r in results {
        if let Some(c) = r? {
            cells.push(c);
        }
    }
    let files: Vec<String> = cells.iter().flat_map(|c| cell_files(&c.cell)).collect();
    let key = key_of(&cells.iter().map(|c| ("cell", c.key.as_str())).collect::<Vec<_>>());
    m.record(&cfg.out, TASKS, &key, &files, t0.elapsed().as_secs_f64())?;
    m.save(&cfg.out)?;
    Ok(cells)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub task: String,
    pub comparison: String,
    pub a: String,
    pub b: String,
    pub n: usize,
    pub mean_diff: Option<f64>,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub rows: Vec<ReportRow>,
    pub significance: Vec<SignificanceRow>,
    pub norm_length_rho: BTreeMap<String, Option<f64>>,
    pub csv: PathBuf,
}

fn significance(cells: &[CellResult], bits: &BTreeMap<String, Vec<u8>>) -> Vec<SignificanceRow> {
    let mut by_task: BTreeMap<&str, Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        by_task.entry(c.task.as_str()).or_default().push(c);
    }
    let mut rows = Vec::new();
    let mut tasks: Vec<&str> = Vec::new();
    for c in cells {
        if !tasks.contains(&c.task.as_str()) {
            tasks.push(&c.task);
        }
    }
    for task in tasks {
        let group = &by_task[task];
        let find = |kind: &str, dim: usize| group.iter().find(|c| c.kind == kind && c.dim == dim).copied();
        let mut pairs: Vec<(&str, &CellResult, &CellResult)> = Vec::new();
        for ed in group.iter().filter(|c| c.kind == "ed") {
            if let Some(cb) = find("cbow", ed.dim) {
                pairs.push(("ed_vs_cbow", ed, cb));
            }
        }
        for kind in ["ed", "cbow"] {
            let mut same: Vec<&CellResult> = group.iter().filter(|c| c.kind == kind).copied().collect();
            same.sort_by_key(|c| c.dim);
            for w in same.windows(2) {
                pairs.push(("adjacent_dim", w[0], w[1]));
            }
        }
        for (comparison, a, b) in pairs {
            let (ba, bb) = (&bits[&a.cell], &bits[&b.cell]);
            let mut row = SignificanceRow {
                task: task.to_string(),
                comparison: comparison.to_string(),
                a: a.encoder.clone(),
                b: b.encoder.clone(),
                n: ba.len(),
                mean_diff: None,
                t: None,
                df: None,
                p_value: None,
                status: "ok".into(),
            };
            match paired_t_test(ba, bb) {
                Ok(r) => {
                    row.mean_diff = Some(r.mean_diff);
                    row.t = Some(r.t);
                    row.df = Some(r.df);
                    row.p_value = Some(r.p_value);
                }
                Err(sentprobe::Error::Degenerate(_)) => row.status = "degenerate".into(),
                Err(e) => row.status = format!("error: {e}"),
            }
            rows.push(row);
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Emits the report CSV/JSONL, the significance matrix, and the length
/// analyses. Every cited artifact is checked against the manifest first.
pub fn cmd_report(cfg: &ExperimentConfig, opts: &Options) -> CliResult<ReportSummary> {
    let out = &cfg.out;
    let mut m = manifest(cfg)?;
    let t0 = Instant::now();
    let prep = load_prepared(cfg, &m)?;
    m.verify(out, TASKS).map_err(|e| CliError::Missing(format!("{e}; run `run-tasks` first")))?;
    let instances = encoder_instances(cfg);
    let mut infos = BTreeMap::new();
    for inst in &instances {
        m.verify(out, &inst.stage())?;
        infos.insert(inst.name.clone(), load_info(cfg, inst)?);
    }
    let mut cells = Vec::new();
    let mut bits = BTreeMap::new();
    for inst in &instances {
        for tv in task_variants(cfg) {
            let cell = cell_name(inst, &tv);
            let [json_f, bits_f, _] = cell_files(&cell);
            if m.digest_of(TASKS, &json_f).is_none() {
                continue;
            }
            let c: CellResult = serde_json::from_slice(&fs::read(out.join(json_f))?)?;
            bits.insert(cell.clone(), read_bits(&out.join(bits_f))?);
            cells.push(c);
        }
    }
    if cells.is_empty() {
        return Err(CliError::Missing("no probe results found; run `run-tasks` first".into()));
    }
    ensure_dir(&out.join("report"))?;

    let rows: Vec<ReportRow> = cells
        .iter()
        .map(|c| {
            let info = &infos[&c.encoder];
            ReportRow {
                task: c.task.clone(),
                encoder: c.kind.clone(),
                dim: c.dim,
                split: "test".into(),
                n: c.n,
                accuracy: c.accuracy,
                baseline: c.baseline,
                bleu: info.bleu,
                seed: cfg.seed,
                checkpoint_digest: c.encoder_digest.clone(),
                paper_reference: paper_reference(&c.task, &c.kind),
                meta: BTreeMap::from([
                    ("cell".to_string(), json!(c.cell)),
                    ("probe_digest".to_string(), json!(c.probe_digest)),
                    ("correct_digest".to_string(), json!(c.correct_digest)),
                    ("probe_epochs".to_string(), json!(c.probe_epochs)),
                    ("skipped".to_string(), json!(c.skipped)),
                    ("profile".to_string(), json!(cfg.profile)),
                    ("encoder_epochs".to_string(), json!(info.epochs)),
                ]),
            }
        })
        .collect();
    let csv = out.join("report/report.csv");
    emit_report(&rows, &csv)?;
    let mut files = vec!["report/report.csv".to_string(), "report/report.jsonl".to_string()];

    let sig = if cells.len() < 2 {
        opts.log("report: fewer than two cells, significance tests skipped");
        Vec::new()
    } else {
        let sig = significance(&cells, &bits);
        let lines: Vec<String> = sig
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.task,
                    r.comparison,
                    r.a,
                    r.b,
                    r.n,
                    opt(r.mean_diff),
                    opt(r.t),
                    opt(r.df),
                    opt(r.p_value),
                    r.status
                )
            })
            .collect();
        write_curve(&out.join("report/significance.csv"), "task,comparison,a,b,n,mean_diff,t,df,p_value,status", &lines)?;
        files.push("report/significance.csv".into());
        sig
    };

    // norm versus length on the probe test sentences
    let corpora = build_corpora(cfg, &prep)?;
    let mut norm_rows = Vec::new();
    let mut rho = BTreeMap::new();
    for inst in instances.iter().filter(|i| i.kind() != "external") {
        let Some(enc) = load_encoder(cfg, inst, &prep.vocab, false)? else { continue };
        let mut corpora_list = vec![("original", &corpora.original.test)];
        if let Some(s) = &corpora.synthetic {
            corpora_list.push(("synthetic", &s.test));
        }
        for (name, sentences) in corpora_list {
            let curve = norm_length_curve(sentences, enc.as_ref())?;
            for p in &curve {
                norm_rows.push(format!("{},{},{},{},{},{}", inst.kind(), infos[&inst.name].dim, name, p.x, p.y, p.n));
            }
            let xs: Vec<f64> = curve.iter().map(|p| p.x as f64).collect();
            let ys: Vec<f64> = curve.iter().map(|p| p.y).collect();
            rho.insert(format!("{}/{name}", inst.name), spearman(&xs, &ys).ok());
        }
    }
    write_curve(&out.join("report/norm_length.csv"), "encoder,dim,corpus,length,mean_norm,n", &norm_rows)?;
    let content_rows: Vec<String> = cells
        .iter()
        .flat_map(|c| {
            c.by_length.iter().map(move |p| format!("{},{},{},{},{},{}", c.task, c.kind, c.dim, p.x, p.y, p.n))
        })
        .collect();
    write_curve(&out.join("report/content_by_length.csv"), "task,encoder,dim,bin_start,accuracy,n", &content_rows)?;
    write_atomic(&out.join("report/analysis.json"), &serde_json::to_vec_pretty(&json!({ "norm_length_spearman": rho }))?)?;
    files.extend(["report/norm_length.csv", "report/content_by_length.csv", "report/analysis.json"].map(String::from));

    let key = key_of(&[("tasks", &m.stages[TASKS].key), ("config", &config_digest(cfg))]);
    m.record(out, REPORT, &key, &files, t0.elapsed().as_secs_f64())?;
    m.save(out)?;
    opts.log(format!("report: {} rows written to {}", rows.len(), csv.display()));
    Ok(ReportSummary { rows, significance: sig, norm_length_rho: rho, csv })
}

/// prepare, train-encoder, run-tasks, report.
pub fn run_all(cfg: &ExperimentConfig, opts: &Options) -> CliResult<ReportSummary> {
    cmd_prepare(cfg, opts)?;
    cmd_train_encoder(cfg, opts, None)?;
    cmd_run_tasks(cfg, opts)?;
    cmd_report(cfg, opts)
}
