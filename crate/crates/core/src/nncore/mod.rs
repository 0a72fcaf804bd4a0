//! Minimal dense numeric core.
//!
//! Gradients are derived by hand for each layer. Forward passes return the
//! values the matching backward pass needs, and backward passes accumulate into
//! [`Parameter::grad`]. Everything runs in 64-bit floating point.

mod checkpoint;
mod dropout;
mod embedding;
mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod optim;
mod param;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use embedding::EmbeddingTable;
pub use gradcheck::{grad_check, relative_error};
pub use linear::LinearLayer;
pub use loss::{log_softmax, softmax, softmax_cross_entropy};
pub use lstm::{LstmCellParams, LstmStep};
pub use optim::{adagrad_update, clip_gradients, global_grad_norm, ADAGRAD_EPS};
pub use param::{init_uniform, Parameter, INIT_RANGE};
pub use tensor::Tensor;

/// Logistic sigmoid, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Something that owns trainable parameters.
pub trait Parameterized {
    /// Parameters with stable, unique names, in a fixed order.
    fn named_params(&self) -> Vec<(String, &Parameter)>;

    fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter)>;

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.named_params_mut().into_iter().map(|(_, p)| p).collect()
    }

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Copies parameter values into a checkpoint under their names.
    fn to_checkpoint(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for (name, p) in self.named_params() {
            ckpt.insert(format!("{prefix}{name}"), p.value.clone());
        }
    }

    /// Copies AdaGrad accumulators into a checkpoint under `<prefix><name>`.
    fn optimizer_to_checkpoint(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for (name, p) in self.named_params() {
            ckpt.insert(format!("{prefix}{name}"), p.adagrad_accum.clone());
        }
    }

    /// Restores parameter values from a checkpoint. Shapes must match.
    fn load_checkpoint(&mut self, ckpt: &Checkpoint, prefix: &str) -> crate::Result<()> {
        for (name, p) in self.named_params_mut() {
            let key = format!("{prefix}{name}");
            let t = ckpt
                .get(&key)
                .ok_or_else(|| crate::Error::data(format!("checkpoint lacks tensor `{key}`")))?;
            p.set_value(t.clone())?;
        }
        Ok(())
    }

    fn load_optimizer_checkpoint(&mut self, ckpt: &Checkpoint, prefix: &str) -> crate::Result<()> {
        for (name, p) in self.named_params_mut() {
            let key = format!("{prefix}{name}");
            let t = ckpt
                .get(&key)
                .ok_or_else(|| crate::Error::data(format!("checkpoint lacks tensor `{key}`")))?;
            if t.shape() != p.value.shape() {
                return Err(crate::Error::dim(format!("optimizer state `{key}` has wrong shape")));
            }
            p.adagrad_accum = t.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(1000.0).is_finite());
        assert!(sigmoid(-1000.0) >= 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
