use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: usize = 0;
pub const DEFAULT_VOCAB_CAP: usize = 50_000;

/// Token/id mapping with corpus counts.
///
/// Id 0 is the unknown token; the remaining ids are assigned by descending
/// frequency with ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    counts: Vec<u64>,
}

/// Keeps the `cap - 1` most frequent tokens plus the unknown token.
pub fn build_vocab<S: AsRef<str>>(sentences: &[Vec<S>], cap: usize) -> Result<Vocabulary> {
    if cap < 2 {
        return Err(Error::config(format!("vocabulary cap must be at least 2, got {cap}")));
    }
    if sentences.is_empty() {
        return Err(Error::data("cannot build a vocabulary from an empty corpus"));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *freq.entry(t.as_ref()).or_default() += 1;
        }
    }
    let unk_literal = freq.remove(UNK_TOKEN).unwrap_or(0);
    let mut ranked: Vec<(&str, u64)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let dropped: u64 = ranked.iter().skip(cap - 1).map(|(_, c)| c).sum();
    ranked.truncate(cap - 1);

    let mut tokens = vec![UNK_TOKEN.to_owned()];
    let mut counts = vec![unk_literal + dropped];
    for (t, c) in ranked {
        tokens.push(t.to_owned());
        counts.push(c);
    }
    Ok(Vocabulary::from_parts(tokens, counts))
}

impl Vocabulary {
    fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            index,
            tokens,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        UNK_ID
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN).to_owned())
            .collect()
    }

    /// Writes `token<TAB>count` lines in id order.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{t}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let (t, c) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected token<TAB>count".into(),
            })?;
            let c: u64 = c.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad count `{c}`"),
            })?;
            if i == 0 && t != UNK_TOKEN {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("first entry must be {UNK_TOKEN}"),
                });
            }
            if i > 0 && c == 0 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "token counts must be positive".into(),
                });
            }
            tokens.push(t.to_owned());
            counts.push(c);
        }
        if tokens.is_empty() {
            return Err(Error::data("empty vocabulary file"));
        }
        let vocab = Self::from_parts(tokens, counts);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::data("vocabulary file has duplicate tokens"));
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn counts_tokens() {
        let v = build_vocab(&corpus(&["a a b"]), 10).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "a", "b"]);
        assert_eq!(v.count(v.id("a")), 2);
        assert_eq!(v.count(UNK_ID), 0);
    }

    #[test]
    fn cap_maps_rare_tokens_to_unk() {
        let v = build_vocab(&corpus(&["a a a a a b b b"]), 2).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("b"), UNK_ID);
        assert_eq!(v.count(UNK_ID), 3);
    }

    #[test]
    fn ties_break_lexicographically_and_deterministically() {
        let c = corpus(&["z y x", "y z x w"]);
        let a = build_vocab(&c, 100).unwrap();
        let b = build_vocab(&c, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens(), [UNK_TOKEN, "x", "y", "z", "w"]);
    }

    #[test]
    fn config_and_data_errors() {
        assert!(matches!(build_vocab(&corpus(&["a"]), 1), Err(Error::Config(_))));
        assert!(build_vocab::<String>(&[], 10).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let v = build_vocab(&corpus(&["the cat sat on the mat"]), 4).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "<unk>\t2\nthe\t2\ncat\t1\nmat\t1\n");
        assert_eq!(Vocabulary::read_tsv(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn tsv_errors_name_the_line() {
        let err = Vocabulary::read_tsv("<unk>\t0\nfoo 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
