//! Flat `key = value` experiment configuration with section prefixes
//! (`encoder.0.type = cbow`), layered over a scale profile.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sentprobe::encoders::{EdTrainConfig, SkipGramConfig};
use sentprobe::probe::ProbeTrainConfig;
use sentprobe::tasks::TaskKind;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EncoderSpec {
    Cbow { dims: Vec<usize> },
    Ed { dims: Vec<usize> },
    External { sentences: PathBuf, words: Option<PathBuf>, permuted: Option<PathBuf> },
}

impl EncoderSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EncoderSpec::Cbow { .. } => "cbow",
            EncoderSpec::Ed { .. } => "ed",
            EncoderSpec::External { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Controls {
    pub permuted: bool,
    pub synthetic: bool,
    pub order_no_sentence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipGramSettings {
    pub window: usize,
    pub epochs: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub clip: f64,
    pub patience: usize,
    pub max_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSettings {
    pub lr: f64,
    pub dropout: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub seed: u64,
    pub corpus: PathBuf,
    pub pretokenized: bool,
    /// Encoder training sentences kept after length filtering (in file order).
    pub max_sentences: usize,
    /// Held-out sentences for encoder-decoder early stopping and BLEU.
    pub validation: usize,
    pub vocab_cap: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probe split sizes drawn from the encoder training sentences.
    pub split: [usize; 3],
    pub encoders: Vec<EncoderSpec>,
    pub tasks: Vec<TaskKind>,
    pub controls: Controls,
    pub skipgram: SkipGramSettings,
    pub ed: EdSettings,
    pub probe: ProbeSettings,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Profile {
    fn dims(self) -> Vec<usize> {
        match self {
            Profile::Desk => vec![16, 32, 64],
            Profile::Paper => vec![100, 300, 500, 750, 1000],
        }
    }

    /// Profile defaults; corpus path and seed still come from the file.
    pub fn defaults(self) -> ExperimentConfig {
        let (max_sentences, validation, vocab_cap, split, ed_epochs) = match self {
            Profile::Desk => (20_000, 500, 5_000, [8_000, 1_000, 1_000], 10),
            Profile::Paper => (1_000_000, 10_000, 50_000, [150_000, 25_000, 25_000], 1_000),
        };
        let ed = EdTrainConfig::default();
        let probe = ProbeTrainConfig::default();
        let sg = SkipGramConfig::default();
        ExperimentConfig {
            profile: self,
            seed: 0,
            corpus: PathBuf::new(),
            pretokenized: false,
            max_sentences,
            validation,
            vocab_cap,
            min_len: sentprobe::corpus::MIN_LEN,
            max_len: sentprobe::corpus::MAX_LEN,
            split,
            encoders: vec![EncoderSpec::Cbow { dims: self.dims() }, EncoderSpec::Ed { dims: self.dims() }],
            tasks: TaskKind::ALL.iter().copied().filter(|t| *t != TaskKind::OrderNoSentence).collect(),
            controls: Controls { permuted: true, synthetic: true, order_no_sentence: true },
            skipgram: SkipGramSettings { window: sg.window, epochs: sg.epochs, lr: sg.lr },
            ed: EdSettings {
                lr: ed.lr,
                batch_size: ed.batch_size,
                dropout: ed.dropout,
                clip: ed.clip,
                patience: ed.patience,
                max_epochs: ed_epochs,
            },
            probe: ProbeSettings {
                lr: probe.lr,
                dropout: probe.dropout,
                patience: probe.patience,
                max_epochs: probe.max_epochs,
                batch_size: probe.batch_size,
            },
            out: PathBuf::from("runs").join(match self {
                Profile::Desk => "desk",
                Profile::Paper => "paper",
            }),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        })
    }
}

fn invalid(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config { line: Some(line), msg: msg.into() }
}

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| invalid(line, format!("`{key}` has invalid value `{v}`")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> CliResult<Vec<T>> {
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(line, key, s))
        .collect::<CliResult<Vec<T>>>()?;
    if items.is_empty() {
        return Err(invalid(line, format!("`{key}` must list at least one value")));
    }
    Ok(items)
}

/// One `key = value` pair with its 1-based line number.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

fn read_entries(text: &str) -> CliResult<BTreeMap<String, Entry>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| invalid(line, format!("expected `key = value`, got `{content}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(invalid(line, "empty key"));
        }
        if let Some(prev) = map.insert(k.to_string(), Entry { line, value: v.to_string() }) {
            return Err(invalid(line, format!("`{k}` already set on line {}", prev.line)));
        }
    }
    Ok(map)
}

#[derive(Default)]
struct EncoderDraft {
    kind: Option<(usize, String)>,
    dims: Option<(usize, Vec<usize>)>,
    sentences: Option<(usize, String)>,
    words: Option<(usize, String)>,
    permuted: Option<(usize, String)>,
    first_line: usize,
}

impl ExperimentConfig {
    /// Parses config text over the profile defaults. Relative paths resolve
    /// against `base`. `seed` overrides the file's seed when given.
    pub fn parse(text: &str, profile: Profile, base: &Path, seed: Option<u64>) -> CliResult<Self> {
        let entries = read_entries(text)?;
        let mut cfg = profile.defaults();
        let mut seed_set = seed.is_some();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let mut corpus_line = None;
        let mut drafts: BTreeMap<usize, EncoderDraft> = BTreeMap::new();
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (key, Entry { line, value }) in &entries {
            let (line, v) = (*line, value.as_str());
            match key.as_str() {
                "seed" => {
                    let s = parse(line, key, v)?;
                    if !seed_set {
                        cfg.seed = s;
                    }
                    seed_set = true;
                }
                "out" => cfg.out = resolve(v),
                "corpus.path" => {
                    cfg.corpus = resolve(v);
                    corpus_line = Some(line);
                }
                "corpus.pretokenized" => cfg.pretokenized = parse_bool(line, key, v)?,
                "corpus.max_sentences" => cfg.max_sentences = parse(line, key, v)?,
                "corpus.validation" => cfg.validation = parse(line, key, v)?,
                "corpus.min_len" => cfg.min_len = parse(line, key, v)?,
                "corpus.max_len" => cfg.max_len = parse(line, key, v)?,
                "vocab.cap" => cfg.vocab_cap = parse(line, key, v)?,
                "split.train" => cfg.split[0] = parse(line, key, v)?,
                "split.dev" => cfg.split[1] = parse(line, key, v)?,
                "split.test" => cfg.split[2] = parse(line, key, v)?,
                "tasks" => {
                    cfg.tasks = parse_list(line, key, v)?;
                    if cfg.tasks.contains(&TaskKind::OrderNoSentence) {
                        return Err(invalid(line, "order_no_sentence is a control; enable controls.order_no_sentence"));
                    }
                }
                "controls.permuted" => cfg.controls.permuted = parse_bool(line, key, v)?,
                "controls.synthetic" => cfg.controls.synthetic = parse_bool(line, key, v)?,
                "controls.order_no_sentence" => cfg.controls.order_no_sentence = parse_bool(line, key, v)?,
                "skipgram.window" => cfg.skipgram.window = parse(line, key, v)?,
                "skipgram.epochs" => cfg.skipgram.epochs = parse(line, key, v)?,
                "skipgram.lr" => cfg.skipgram.lr = parse(line, key, v)?,
                "ed.lr" => cfg.ed.lr = parse(line, key, v)?,
                "ed.batch" => cfg.ed.batch_size = parse(line, key, v)?,
                "ed.dropout" => cfg.ed.dropout = parse(line, key, v)?,
                "ed.clip" => cfg.ed.clip = parse(line, key, v)?,
                "ed.patience" => cfg.ed.patience = parse(line, key, v)?,
                "ed.max_epochs" => cfg.ed.max_epochs = parse(line, key, v)?,
                "probe.lr" => cfg.probe.lr = parse(line, key, v)?,
                "probe.dropout" => cfg.probe.dropout = parse(line, key, v)?,
                "probe.patience" => cfg.probe.patience = parse(line, key, v)?,
                "probe.max_epochs" => cfg.probe.max_epochs = parse(line, key, v)?,
                "probe.batch" => cfg.probe.batch_size = parse(line, key, v)?,
                k if k.starts_with("encoder.") => {
                    let mut parts = k.splitn(3, '.').skip(1);
                    let idx: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| invalid(line, format!("`{k}`: expected encoder.<index>.<field>")))?;
                    let field = parts.next().unwrap_or("");
                    let d = drafts.entry(idx).or_insert_with(|| EncoderDraft { first_line: line, ..Default::default() });
                    d.first_line = d.first_line.min(line);
                    match field {
                        "type" => d.kind = Some((line, v.to_string())),
                        "dims" => d.dims = Some((line, parse_list(line, k, v)?)),
                        "sentences" => d.sentences = Some((line, v.to_string())),
                        "words" => d.words = Some((line, v.to_string())),
                        "permuted" => d.permuted = Some((line, v.to_string())),
                        _ => return Err(invalid(line, format!("unknown encoder field `{field}`"))),
                    }
                }
                _ => return Err(invalid(line, format!("unknown key `{key}`"))),
            }
        }
        if !seed_set {
            return Err(CliError::Config { line: None, msg: "`seed` is required (set it in the file or pass --seed)".into() });
        }
        if !drafts.is_empty() {
            cfg.encoders = drafts
                .into_values()
                .map(|d| {
                    let (kl, kind) = d.kind.ok_or_else(|| invalid(d.first_line, "encoder is missing `type`"))?;
                    let dims = |d: Option<(usize, Vec<usize>)>| match d {
                        Some((l, v)) if v.contains(&0) => Err(invalid(l, "dimensions must be positive")),
                        Some((_, v)) => Ok(v),
                        None => Ok(profile.dims()),
                    };
                    match kind.as_str() {
                        "cbow" => Ok(EncoderSpec::Cbow { dims: dims(d.dims)? }),
                        "ed" => Ok(EncoderSpec::Ed { dims: dims(d.dims)? }),
                        "external" => {
                            let (sl, s) = d
                                .sentences
                                .ok_or_else(|| invalid(kl, "external encoder needs `sentences`"))?;
                            let check = |l: usize, p: &str| {
                                let p = resolve(p);
                                if p.is_file() {
                                    Ok(p)
                                } else {
                                    Err(invalid(l, format!("file not found: {}", p.display())))
                                }
                            };
                            Ok(EncoderSpec::External {
                                sentences: check(sl, &s)?,
                                words: d.words.map(|(l, p)| check(l, &p)).transpose()?,
                                permuted: d.permuted.map(|(l, p)| check(l, &p)).transpose()?,
                            })
                        }
                        other => Err(invalid(kl, format!("unknown encoder type `{other}` (cbow, ed, external)"))),
                    }
                })
                .collect::<CliResult<Vec<_>>>()?;
        }
        match corpus_line {
            None => return Err(CliError::Config { line: None, msg: "`corpus.path` is required".into() }),
            Some(l) if !cfg.corpus.is_file() => {
                return Err(invalid(l, format!("corpus file not found: {}", cfg.corpus.display())))
            }
            _ => {}
        }
        cfg.check(&entries)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Profile, seed: Option<u64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config { line: None, msg: format!("cannot read {}: {e}", path.display()) })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, profile, base, seed)
    }

    fn check(&self, entries: &BTreeMap<String, Entry>) -> CliResult<()> {
        let at = |k: &str| entries.get(k).map(|e| e.line);
        let fail = |k: &str, msg: String| CliError::Config { line: at(k), msg };
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(fail("corpus.min_len", format!("bad length bounds {}..{}", self.min_len, self.max_len)));
        }
        if self.vocab_cap < 2 {
            return Err(fail("vocab.cap", "vocab.cap must be at least 2".into()));
        }
        if self.split.contains(&0) {
            return Err(fail("split.train", "split sizes must be positive".into()));
        }
        if self.split.iter().sum::<usize>() > self.max_sentences {
            return Err(fail(
                "corpus.max_sentences",
                format!("probe split {:?} exceeds corpus.max_sentences {}", self.split, self.max_sentences),
            ));
        }
        if self.validation == 0 {
            return Err(fail("corpus.validation", "corpus.validation must be positive".into()));
        }
        for (k, rate) in [("ed.dropout", self.ed.dropout), ("probe.dropout", self.probe.dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(fail(k, format!("{k} must be in [0, 1), got {rate}")));
            }
        }
        for (k, lr) in [("ed.lr", self.ed.lr), ("probe.lr", self.probe.lr), ("skipgram.lr", self.skipgram.lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(fail(k, format!("{k} must be positive")));
            }
        }
        for (k, n) in [
            ("ed.batch", self.ed.batch_size),
            ("ed.max_epochs", self.ed.max_epochs),
            ("probe.batch", self.probe.batch_size),
            ("probe.max_epochs", self.probe.max_epochs),
            ("skipgram.epochs", self.skipgram.epochs),
            ("skipgram.window", self.skipgram.window),
        ] {
            if n == 0 {
                return Err(fail(k, format!("{k} must be positive")));
            }
        }
        if self.encoders.is_empty() {
            return Err(CliError::Config { line: None, msg: "no encoders configured".into() });
        }
        Ok(())
    }

    pub fn skipgram_config(&self, dim: usize) -> SkipGramConfig {
        SkipGramConfig {
            dim,
            window: self.skipgram.window,
            epochs: self.skipgram.epochs,
            lr: self.skipgram.lr,
            seed: sentprobe::rng::derive_seed_str(self.seed, &format!("skipgram.{dim}")),
        }
    }

    pub fn ed_config(&self, dim: usize) -> EdTrainConfig {
        EdTrainConfig {
            dim,
            batch_size: self.ed.batch_size,
            lr: self.ed.lr,
            dropout: self.ed.dropout,
            clip: self.ed.clip,
            patience: self.ed.patience,
            max_epochs: self.ed.max_epochs,
            seed: sentprobe::rng::derive_seed_str(self.seed, &format!("ed.{dim}")),
            target_dev_accuracy: None,
        }
    }

    pub fn probe_config(&self, cell: &str) -> ProbeTrainConfig {
        ProbeTrainConfig {
            lr: self.probe.lr,
            dropout: self.probe.dropout,
            patience: self.probe.patience,
            max_epochs: self.probe.max_epochs,
            batch_size: self.probe.batch_size,
            seed: sentprobe::rng::derive_seed_str(self.seed, &format!("probe.{cell}")),
        }
    }

    /// Canonical JSON of everything that affects results.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
