use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Sentence;
use crate::rng;
use crate::{Error, Result};

/// Disjoint train/dev/test partitions, each sorted by source id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
}

/// On-disk description of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub sizes: [usize; 3],
    pub train: Vec<u64>,
    pub dev: Vec<u64>,
    pub test: Vec<u64>,
}

/// Shuffles with `seed` and takes the first `n_train`, next `n_dev` and next `n_test` sentences.
pub fn split_corpus(
    sentences: &[Sentence],
    n_train: usize,
    n_dev: usize,
    n_test: usize,
    seed: u64,
) -> Result<CorpusSplit> {
    let need = n_train + n_dev + n_test;
    if need > sentences.len() {
        return Err(Error::data(format!(
            "split needs {need} sentences but the corpus has {}",
            sentences.len()
        )));
    }
    let unique: HashSet<u64> = sentences.iter().map(|s| s.source_id).collect();
    if unique.len() != sentences.len() {
        return Err(Error::data("corpus has duplicate source ids"));
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let take = |range: std::ops::Range<usize>| {
        let mut part: Vec<Sentence> = order[range].iter().map(|&i| sentences[i].clone()).collect();
        part.sort_by_key(|s| s.source_id);
        part
    };
    Ok(CorpusSplit {
        train: take(0..n_train),
        dev: take(n_train..n_train + n_dev),
        test: take(n_train + n_dev..need),
    })
}

impl CorpusSplit {
    pub fn manifest(&self, seed: u64) -> SplitManifest {
        let ids = |v: &[Sentence]| v.iter().map(|s| s.source_id).collect();
        SplitManifest {
            seed,
            sizes: [self.train.len(), self.dev.len(), self.test.len()],
            train: ids(&self.train),
            dev: ids(&self.dev),
            test: ids(&self.test),
        }
    }

    /// Rebuilds a split from a manifest and the sentences it names.
    pub fn from_manifest(m: &SplitManifest, sentences: &[Sentence]) -> Result<Self> {
        let by_id: std::collections::HashMap<u64, &Sentence> =
            sentences.iter().map(|s| (s.source_id, s)).collect();
        let pick = |ids: &[u64]| -> Result<Vec<Sentence>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id)
                        .map(|s| (*s).clone())
                        .ok_or_else(|| Error::data(format!("split names unknown sentence {id}")))
                })
                .collect()
        };
        Ok(CorpusSplit {
            train: pick(&m.train)?,
            dev: pick(&m.dev)?,
            test: pick(&m.test)?,
        })
    }

    pub fn parts(&self) -> [(&'static str, &[Sentence]); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }

    /// Applies `f` to every partition.
    pub fn map(&self, mut f: impl FnMut(&[Sentence]) -> Vec<Sentence>) -> CorpusSplit {
        CorpusSplit {
            train: f(&self.train),
            dev: f(&self.dev),
            test: f(&self.test),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(n: usize) -> Vec<Sentence> {
        (0..n).map(|i| Sentence::new(i as u64 * 3 + 1, vec![1, 2, 3, 4, 5])).collect()
    }

    #[test]
    fn same_seed_same_split() {
        let c = corpus(100);
        assert_eq!(split_corpus(&c, 50, 20, 20, 9).unwrap(), split_corpus(&c, 50, 20, 20, 9).unwrap());
        assert_ne!(split_corpus(&c, 50, 20, 20, 9).unwrap(), split_corpus(&c, 50, 20, 20, 10).unwrap());
    }

    #[test]
    fn insufficient_sentences() {
        assert!(split_corpus(&corpus(10), 8, 2, 1, 0).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let c = corpus(30);
        let s = split_corpus(&c, 10, 5, 5, 1).unwrap();
        let m = s.manifest(1);
        let json = serde_json::to_string(&m).unwrap();
        let back: SplitManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(CorpusSplit::from_manifest(&back, &c).unwrap(), s);
    }

    proptest! {
        #[test]
        fn parts_are_disjoint_and_sized(n in 3usize..200, seed in any::<u64>(), a in 0usize..100, b in 0usize..100, t in 0usize..100) {
            let c = corpus(n);
            let (a, b, t) = (a % (n / 3 + 1), b % (n / 3 + 1), t % (n / 3 + 1));
            let s = split_corpus(&c, a, b, t, seed).unwrap();
            prop_assert_eq!([s.train.len(), s.dev.len(), s.test.len()], [a, b, t]);
            let mut ids: Vec<u64> = s.parts().iter().flat_map(|(_, p)| p.iter().map(|x| x.source_id)).collect();
            let total = ids.len();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), total);
            prop_assert!(ids.iter().all(|id| c.iter().any(|x| x.source_id == *id)));
        }
    }
}
