use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{tokenize_line, Vocabulary};
use crate::{Error, Result};

pub const MIN_LEN: usize = 5;
pub const MAX_LEN: usize = 70;

/// A sentence as vocabulary ids, tagged with a corpus-unique source id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub source_id: u64,
    pub tokens: Vec<usize>,
}

impl Sentence {
    pub fn new(source_id: u64, tokens: Vec<usize>) -> Self {
        Sentence { source_id, tokens }
    }

    pub fn from_tokens<S: AsRef<str>>(source_id: u64, tokens: &[S], vocab: &Vocabulary) -> Self {
        Sentence::new(source_id, vocab.encode(tokens))
    }

    /// Word count N.
    pub fn raw_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Keeps sentences whose word count lies in `min..=max`, preserving order.
pub fn filter_lengths<T, F>(items: Vec<T>, min: usize, max: usize, len: F) -> Result<Vec<T>>
where
    F: Fn(&T) -> usize,
{
    if min > max {
        return Err(Error::config(format!("length bounds {min} > {max}")));
    }
    Ok(items
        .into_iter()
        .filter(|s| (min..=max).contains(&len(s)))
        .collect())
}

/// Reads one sentence per line. Blank lines are skipped; the returned pairs
/// carry the zero-based line number as source id.
pub fn read_lines<R: BufRead>(r: R, pretokenized: bool) -> Result<Vec<(u64, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let toks = tokenize_line(&line, pretokenized);
        if !toks.is_empty() {
            out.push((i as u64, toks));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn of_len(n: usize) -> Sentence {
        Sentence::new(n as u64, vec![1; n])
    }

    #[test]
    fn bounds_are_inclusive() {
        let kept = filter_lengths(
            vec![of_len(4), of_len(5), of_len(70), of_len(71)],
            MIN_LEN,
            MAX_LEN,
            Sentence::raw_len,
        )
        .unwrap();
        let lens: Vec<_> = kept.iter().map(Sentence::raw_len).collect();
        assert_eq!(lens, [5, 70]);
    }

    #[test]
    fn empty_input_and_bad_bounds() {
        assert!(filter_lengths(Vec::<Sentence>::new(), 5, 70, Sentence::raw_len)
            .unwrap()
            .is_empty());
        assert!(matches!(
            filter_lengths(vec![of_len(5)], 9, 5, Sentence::raw_len),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn order_is_preserved() {
        let input: Vec<_> = [7, 3, 9, 12, 80, 6].into_iter().map(of_len).collect();
        let kept = filter_lengths(input, 5, 70, Sentence::raw_len).unwrap();
        let ids: Vec<_> = kept.iter().map(|s| s.source_id).collect();
        assert_eq!(ids, [7, 9, 12, 6]);
    }

    #[test]
    fn reads_lines_with_line_numbers() {
        let text = "The cat sat.\n\nA b c\n";
        let lines = read_lines(text.as_bytes(), false).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].1, ["The", "cat", "sat", "."]);
        assert_eq!(lines[1].0, 2);
    }
}
