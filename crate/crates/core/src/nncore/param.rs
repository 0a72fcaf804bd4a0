use rand::Rng;

use super::Tensor;
use crate::{Error, Result};

/// Half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.1;

/// A trainable tensor with its gradient and AdaGrad accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub adagrad_accum: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        let adagrad_accum = Tensor::zeros(value.shape());
        Parameter {
            value,
            grad,
            adagrad_accum,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Tensor::zeros(shape))
    }

    /// Entries drawn uniformly from `[-INIT_RANGE, INIT_RANGE]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let mut t = Tensor::zeros(shape);
        init_uniform(t.data_mut(), INIT_RANGE, rng);
        Self::new(t)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn set_value(&mut self, value: Tensor) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::dim(format!(
                "parameter shape {:?} cannot take value of shape {:?}",
                self.value.shape(),
                value.shape()
            )));
        }
        self.value = value;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

pub fn init_uniform<R: Rng + ?Sized>(data: &mut [f64], range: f64, rng: &mut R) {
    for x in data {
        *x = rng.gen_range(-range..=range);
    }
}
