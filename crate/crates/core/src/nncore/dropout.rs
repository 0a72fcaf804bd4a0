use rand::Rng;

use crate::{Error, Result};

/// Per-entry multipliers applied by one dropout call: `0` for dropped entries
/// and `1 / (1 - rate)` for survivors. Empty in eval mode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inverted dropout. In eval mode (or with `rate == 0`) the input is returned unchanged.
pub fn dropout<R: Rng + ?Sized>(
    x: &[f64],
    rate: f64,
    rng: &mut R,
    train_mode: bool,
) -> Result<(Vec<f64>, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !train_mode || rate == 0.0 {
        return Ok((x.to_vec(), DropoutMask::default()));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((out, DropoutMask(mask)))
}

pub fn dropout_backward(grad_out: &[f64], mask: &DropoutMask) -> Vec<f64> {
    if mask.is_identity() {
        return grad_out.to_vec();
    }
    grad_out.iter().zip(&mask.0).map(|(g, m)| g * m).collect()
}
