use rand::Rng;

use super::{axpy, dot, Parameter, Parameterized, Tensor};
use crate::{Error, Result};

/// Affine map `y = W x + b` with `W` stored as an `out x in` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl LinearLayer {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        LinearLayer {
            weight: Parameter::uniform(&[output, input], rng),
            bias: Parameter::uniform(&[output], rng),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        LinearLayer {
            weight: Parameter::zeros(&[output, input]),
            bias: Parameter::zeros(&[output]),
        }
    }

    pub fn from_values(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::dim(format!(
                "weight {:?} and bias {:?} do not form a linear layer",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(LinearLayer {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    /// Returns `W x + b`. The caller keeps `x` for [`LinearLayer::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "linear layer expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let w = &self.weight.value;
        Ok(self
            .bias
            .value
            .data()
            .iter()
            .enumerate()
            .map(|(o, b)| b + dot(w.row(o), x))
            .collect())
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
    pub fn backward(&mut self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        debug_assert_eq!(grad_out.len(), self.output_dim());
        let mut grad_in = vec![0.0; self.input_dim()];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad.data_mut()[o] += g;
            axpy(g, x, self.weight.grad.row_mut(o));
            axpy(g, self.weight.value.row(o), &mut grad_in);
        }
        grad_in
    }

    /// Like [`LinearLayer::backward`] but skips the input gradient.
    pub fn backward_params(&mut self, x: &[f64], grad_out: &[f64]) {
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad.data_mut()[o] += g;
            axpy(g, x, self.weight.grad.row_mut(o));
        }
    }
}

impl Parameterized for LinearLayer {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        vec![
            ("weight".into(), &mut self.weight),
            ("bias".into(), &mut self.bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[f64], rows: usize, b: &[f64]) -> LinearLayer {
        let cols = w.len() / rows;
        LinearLayer::from_values(
            Tensor::new(vec![rows, cols], w.to_vec()).unwrap(),
            Tensor::from_vec(b.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn identity_weight_passes_input_through() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, &[0.0, 0.0]);
        assert_eq!(l.forward(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn zero_weight_returns_bias() {
        let l = layer(&[0.0, 0.0, 0.0], 1, &[2.0]);
        assert_eq!(l.forward(&[5.0, -7.0, 0.25]).unwrap(), vec![2.0]);
    }

    #[test]
    fn hand_matrix_vector_product() {
        let l = layer(&[1.0, 2.0, 3.0, 4.0], 2, &[0.0, 0.0]);
        assert_eq!(l.forward(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn wrong_input_length_is_a_dimension_error() {
        let l = LinearLayer::zeros(3, 2);
        assert!(matches!(l.forward(&[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn backward_matches_hand_derivation() {
        let mut l = layer(&[1.0, 2.0, 3.0, 4.0], 2, &[0.0, 0.0]);
        let gin = l.backward(&[1.0, -1.0], &[1.0, 2.0]);
        assert_eq!(gin, vec![7.0, 10.0]);
        assert_eq!(l.weight.grad.data(), &[1.0, -1.0, 2.0, -2.0]);
        assert_eq!(l.bias.grad.data(), &[1.0, 2.0]);
    }
}
