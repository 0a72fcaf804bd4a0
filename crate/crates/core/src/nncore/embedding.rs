use std::collections::BTreeSet;

use rand::Rng;

use super::{axpy, Parameter, Parameterized};
use crate::{Error, Result};

/// A `V x d` lookup table. Rows touched by backward passes are tracked so the
/// optimizer can skip untouched rows, whose gradient is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vectors: Parameter,
    touched: BTreeSet<usize>,
}

impl EmbeddingTable {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        EmbeddingTable {
            vectors: Parameter::uniform(&[vocab_size, dim], rng),
            touched: BTreeSet::new(),
        }
    }

    pub fn from_parameter(vectors: Parameter) -> Result<Self> {
        if vectors.value.shape().len() != 2 {
            return Err(Error::dim("embedding table must be rank 2"));
        }
        Ok(EmbeddingTable {
            vectors,
            touched: BTreeSet::new(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.value.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.vectors.value.shape()[1]
    }

    pub fn lookup(&self, id: usize) -> Result<&[f64]> {
        if id >= self.vocab_size() {
            return Err(Error::data(format!(
                "id {id} outside embedding table of size {}",
                self.vocab_size()
            )));
        }
        Ok(self.vectors.value.row(id))
    }

    pub fn accumulate_grad(&mut self, id: usize, grad: &[f64]) {
        axpy(1.0, grad, self.vectors.grad.row_mut(id));
        self.touched.insert(id);
    }

    /// AdaGrad step restricted to rows with gradient, then clears the record.
    pub fn adagrad_update_touched(&mut self, lr: f64) {
        let p = &mut self.vectors;
        for &row in &self.touched {
            let g = p.grad.row_mut(row);
            let a = p.adagrad_accum.row_mut(row);
            let v = p.value.row_mut(row);
            for j in 0..g.len() {
                a[j] += g[j] * g[j];
                v[j] -= lr * g[j] / (a[j].sqrt() + super::ADAGRAD_EPS);
                g[j] = 0.0;
            }
        }
        self.touched.clear();
    }

    /// Plain SGD step `row -= lr * grad` on touched rows.
    pub fn sgd_update_touched(&mut self, lr: f64) {
        let p = &mut self.vectors;
        for &row in &self.touched {
            let g = p.grad.row_mut(row);
            let v = p.value.row_mut(row);
            for j in 0..g.len() {
                v[j] -= lr * g[j];
                g[j] = 0.0;
            }
        }
        self.touched.clear();
    }

    pub(crate) fn forget_touched(&mut self) {
        self.touched.clear();
    }
}

impl Parameterized for EmbeddingTable {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        vec![("vectors".into(), &self.vectors)]
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        vec![("vectors".into(), &mut self.vectors)]
    }

    fn zero_grads(&mut self) {
        self.vectors.zero_grad();
        self.touched.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::adagrad_update;
    use crate::rng;

    #[test]
    fn sparse_update_equals_dense_update() {
        let mut r = rng::seeded(1);
        let mut sparse = EmbeddingTable::new(5, 3, &mut r);
        let mut dense = sparse.clone();
        for t in [&mut sparse, &mut dense] {
            t.accumulate_grad(1, &[0.5, -1.0, 2.0]);
            t.accumulate_grad(3, &[1.0, 1.0, 1.0]);
        }
        sparse.adagrad_update_touched(0.1);
        adagrad_update(&mut dense.vectors, 0.1);
        assert_eq!(sparse.vectors, dense.vectors);
    }

    #[test]
    fn lookup_checks_range() {
        let t = EmbeddingTable::new(2, 2, &mut rng::seeded(0));
        assert!(t.lookup(1).is_ok());
        assert!(t.lookup(2).is_err());
    }
}
