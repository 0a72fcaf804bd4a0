//! Externally computed embeddings.
//!
//! Word vectors use the word2vec text layout: a `V d` header line followed by
//! `V` lines of `token v1 ... vd`. Sentence vectors are JSON lines
//! `{"id": <source id>, "v": [...]}`; the word2vec layout with integer ids as
//! tokens is accepted as well.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocabulary, UNK_TOKEN};
use crate::nncore::Tensor;
use crate::{Error, Result};

use super::SentenceEncoder;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExternalEmbeddingSet {
    pub sentences: BTreeMap<u64, Vec<f64>>,
    pub sentence_dim: usize,
    pub words: Option<HashMap<String, Vec<f64>>>,
    pub word_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct SentenceLine {
    id: u64,
    v: Vec<f64>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads a word2vec text file into tokens (file order) and a `V x d` table.
pub fn read_word_vectors<R: BufRead>(r: R) -> Result<(Vec<String>, Tensor)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing `V d` header"))??;
    let mut hp = header.split_whitespace().map(str::parse::<usize>);
    let (count, dim) = match (hp.next(), hp.next(), hp.next()) {
        (Some(Ok(c)), Some(Ok(d)), None) if d > 0 => (c, d),
        _ => return Err(parse_err(1, format!("expected `V d` header, got `{header}`"))),
    };
    let mut tokens = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().expect("nonempty line").to_owned();
        let before = data.len();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| parse_err(lineno, format!("`{p}` is not a number")))?;
            data.push(v);
        }
        let got = data.len() - before;
        if got != dim {
            return Err(parse_err(lineno, format!("expected {dim} components, found {got}")));
        }
        tokens.push(token);
    }
    if tokens.len() != count {
        return Err(parse_err(
            tokens.len() + 1,
            format!("header announces {count} vectors, file has {}", tokens.len()),
        ));
    }
    if count == 0 {
        return Err(parse_err(1, "file contains no vectors"));
    }
    Ok((tokens, Tensor::new(vec![count, dim], data)?))
}

/// Writes the word2vec text layout; floats use the shortest round-trip form.
pub fn write_word_vectors<W: Write>(w: &mut W, tokens: &[String], vectors: &Tensor) -> Result<()> {
    if tokens.len() != vectors.shape()[0] {
        return Err(Error::dim("one token per vector row required"));
    }
    writeln!(w, "{} {}", tokens.len(), vectors.cols())?;
    for (i, t) in tokens.iter().enumerate() {
        write!(w, "{t}")?;
        for v in vectors.row(i) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads sentence vectors keyed by source id.
pub fn read_sentence_vectors<R: BufRead>(mut r: R) -> Result<BTreeMap<u64, Vec<f64>>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let mut out = BTreeMap::new();
    if first.trim_start().starts_with('{') {
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: SentenceLine =
                serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            let d = *dim.get_or_insert(rec.v.len());
            if rec.v.len() != d || d == 0 {
                return Err(parse_err(i + 1, format!("expected {d} components, found {}", rec.v.len())));
            }
            if out.insert(rec.id, rec.v).is_some() {
                return Err(parse_err(i + 1, format!("duplicate sentence id {}", rec.id)));
            }
        }
    } else {
        let (ids, table) = read_word_vectors(text.as_bytes())?;
        for (i, id) in ids.iter().enumerate() {
            let n: u64 = id
                .parse()
                .map_err(|_| parse_err(i + 2, format!("sentence id `{id}` is not an integer")))?;
            if out.insert(n, table.row(i).to_vec()).is_some() {
                return Err(parse_err(i + 2, format!("duplicate sentence id {n}")));
            }
        }
    }
    if out.is_empty() {
        return Err(parse_err(1, "no sentence vectors"));
    }
    Ok(out)
}

/// Writes JSON lines `{"id":..,"v":[..]}` in the order given.
pub fn write_sentence_vectors<'a, W: Write>(
    w: &mut W,
    vectors: impl IntoIterator<Item = (u64, &'a [f64])>,
) -> Result<()> {
    for (id, v) in vectors {
        serde_json::to_writer(&mut *w, &SentenceLine { id, v: v.to_vec() })?;
        writeln!(w)?;
    }
    Ok(())
}

/// Loads sentence vectors and, optionally, word vectors.
pub fn load_external_embeddings(
    sentence_path: impl AsRef<Path>,
    word_path: Option<&Path>,
) -> Result<ExternalEmbeddingSet> {
    let sentences = read_sentence_vectors(BufReader::new(File::open(sentence_path)?))?;
    let sentence_dim = sentences.values().next().map_or(0, Vec::len);
    let (words, word_dim) = match word_path {
        Some(p) => {
            let (tokens, table) = read_word_vectors(BufReader::new(File::open(p)?))?;
            let mut map = HashMap::with_capacity(tokens.len());
            for (i, t) in tokens.into_iter().enumerate() {
                if map.insert(t.clone(), table.row(i).to_vec()).is_some() {
                    return Err(parse_err(i + 2, format!("duplicate word `{t}`")));
                }
            }
            (Some(map), table.cols())
        }
        None => (None, 0),
    };
    Ok(ExternalEmbeddingSet {
        sentences,
        sentence_dim,
        words,
        word_dim,
    })
}

impl ExternalEmbeddingSet {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn has_word_vectors(&self) -> bool {
        self.words.is_some()
    }
}

/// Adapts an [`ExternalEmbeddingSet`] to corpus ids: sentences are looked up
/// by source id and words through the vocabulary's token strings, falling
/// back to an `<unk>` entry when the word file has one.
#[derive(Debug, Clone)]
pub struct ExternalEncoder {
    set: ExternalEmbeddingSet,
    tokens: Vec<String>,
}

impl ExternalEncoder {
    pub fn new(set: ExternalEmbeddingSet, vocab: &Vocabulary) -> Self {
        ExternalEncoder {
            set,
            tokens: vocab.tokens().to_vec(),
        }
    }

    pub fn set(&self) -> &ExternalEmbeddingSet {
        &self.set
    }
}

impl SentenceEncoder for ExternalEncoder {
    fn kind(&self) -> &str {
        "external"
    }

    fn sentence_dim(&self) -> usize {
        self.set.sentence_dim
    }

    fn word_dim(&self) -> usize {
        self.set.word_dim
    }

    fn encode(&self, sentence: &Sentence) -> Result<Vec<f64>> {
        self.set
            .sentences
            .get(&sentence.source_id)
            .cloned()
            .ok_or_else(|| Error::data(format!("no external vector for sentence {}", sentence.source_id)))
    }

    fn word_vector(&self, token: usize) -> Result<Vec<f64>> {
        let words = self
            .set
            .words
            .as_ref()
            .ok_or_else(|| Error::data("external embeddings have no word vectors; content and order tasks need them"))?;
        let t = self
            .tokens
            .get(token)
            .ok_or_else(|| Error::data(format!("token id {token} outside vocabulary")))?;
        words
            .get(t)
            .or_else(|| words.get(UNK_TOKEN))
            .cloned()
            .ok_or_else(|| Error::data(format!("no external word vector for `{t}` and no {UNK_TOKEN} fallback")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use proptest::prelude::*;

    #[test]
    fn reads_header_and_rows() {
        let (tokens, t) = read_word_vectors("2 3\na 1 2 3\nb 0.5 -1 0\n".as_bytes()).unwrap();
        assert_eq!(tokens, ["a", "b"]);
        assert_eq!(t.shape(), &[2, 3]);
        let s = read_sentence_vectors("2 3\n10 1 2 3\n11 0.5 -1 0\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[&11], vec![0.5, -1.0, 0.0]);
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let err = read_word_vectors("2 3\na 1 2 3\nb 0.5 -1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_sentence_vectors("{\"id\":1,\"v\":[1,2]}\n{\"id\":2,\"v\":[1]}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicates_and_counts() {
        assert!(read_sentence_vectors("{\"id\":1,\"v\":[1]}\n{\"id\":1,\"v\":[2]}\n".as_bytes()).is_err());
        assert!(read_word_vectors("3 1\na 1\nb 2\n".as_bytes()).is_err());
        assert!(read_word_vectors("x y\n".as_bytes()).is_err());
    }

    #[test]
    fn encoder_lookups() {
        let vocab = build_vocab(&[vec!["cat", "dog", "cat"]], 10).unwrap();
        let mut words = HashMap::new();
        words.insert("cat".to_owned(), vec![1.0, 0.0]);
        let set = ExternalEmbeddingSet {
            sentences: [(7u64, vec![0.1, 0.2, 0.3])].into_iter().collect(),
            sentence_dim: 3,
            words: Some(words.clone()),
            word_dim: 2,
        };
        let enc = ExternalEncoder::new(set.clone(), &vocab);
        assert_eq!(enc.encode(&Sentence::new(7, vec![1])).unwrap().len(), 3);
        assert!(enc.encode(&Sentence::new(8, vec![1])).is_err());
        assert_eq!(enc.word_vector(vocab.id("cat")).unwrap(), vec![1.0, 0.0]);
        assert!(enc.word_vector(vocab.id("dog")).is_err());

        words.insert(UNK_TOKEN.to_owned(), vec![0.0, 0.0]);
        let enc = ExternalEncoder::new(ExternalEmbeddingSet { words: Some(words), ..set.clone() }, &vocab);
        assert_eq!(enc.word_vector(vocab.id("dog")).unwrap(), vec![0.0, 0.0]);

        let enc = ExternalEncoder::new(ExternalEmbeddingSet { words: None, ..set }, &vocab);
        assert!(enc.word_vector(1).is_err());
    }

    proptest! {
        #[test]
        fn writers_round_trip_textually(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..6)) {
            let tokens: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
            let t = Tensor::new(vec![rows.len(), 4], rows.concat()).unwrap();
            let mut a = Vec::new();
            write_word_vectors(&mut a, &tokens, &t).unwrap();
            let (tok2, t2) = read_word_vectors(a.as_slice()).unwrap();
            let mut b = Vec::new();
            write_word_vectors(&mut b, &tok2, &t2).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(t, t2);

            let mut s = Vec::new();
            write_sentence_vectors(&mut s, rows.iter().enumerate().map(|(i, r)| (i as u64, r.as_slice()))).unwrap();
            let back = read_sentence_vectors(s.as_slice()).unwrap();
            let mut s2 = Vec::new();
            write_sentence_vectors(&mut s2, back.iter().map(|(&i, r)| (i, r.as_slice()))).unwrap();
            prop_assert_eq!(s, s2);
        }
    }
}
