//! Aggregates over sentence length: embedding norm per length and task
//! accuracy per length bin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::encoders::SentenceEncoder;
use crate::nncore::l2_norm;
use crate::tasks::{LengthBins, TaskDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Sentence length, or the lower bound of a length bin.
    pub x: usize,
    pub y: f64,
    pub n: usize,
}

/// Mean L2 norm of the sentence vector for each exact sentence length.
pub fn norm_length_curve(sentences: &[Sentence], encoder: &dyn SentenceEncoder) -> Result<Vec<CurvePoint>> {
    if sentences.is_empty() {
        return Err(Error::data("norm curve over an empty corpus"));
    }
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for s in sentences {
        let norm = l2_norm(&encoder.encode(s)?);
        let e = acc.entry(s.len()).or_insert((0.0, 0));
        e.0 += norm;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(x, (sum, n))| CurvePoint { x, y: sum / n as f64, n }).collect())
}

/// Mean correctness per length bin of each instance's source sentence.
/// Empty bins are omitted.
pub fn content_accuracy_by_length(correct: &[u8], data: &TaskDataset, bins: &LengthBins) -> Result<Vec<CurvePoint>> {
    if correct.len() != data.len() {
        return Err(Error::dim(format!(
            "{} correctness entries for {} instances",
            correct.len(),
            data.len()
        )));
    }
    let mut acc = vec![(0usize, 0usize); bins.len()];
    for (c, inst) in correct.iter().zip(&data.instances) {
        let b = bins.bin(inst.meta.len)?;
        acc[b].0 += usize::from(*c);
        acc[b].1 += 1;
    }
    Ok(bins
        .bins()
        .iter()
        .zip(acc)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(&(lo, _), (k, n))| CurvePoint { x: lo, y: k as f64 / n as f64, n })
        .collect())
}
