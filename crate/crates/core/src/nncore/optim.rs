use super::Parameter;

/// Added to the square-rooted accumulator before dividing.
pub const ADAGRAD_EPS: f64 = 1e-8;

/// One AdaGrad step: `accum += g^2; value -= lr * g / (sqrt(accum) + eps)`,
/// then zeroes the gradient.
pub fn adagrad_update(param: &mut Parameter, lr: f64) {
    let g = param.grad.data_mut();
    let a = param.adagrad_accum.data_mut();
    let v = param.value.data_mut();
    for j in 0..g.len() {
        a[j] += g[j] * g[j];
        v[j] -= lr * g[j] / (a[j].sqrt() + ADAGRAD_EPS);
        g[j] = 0.0;
    }
}

pub fn global_grad_norm<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> f64 {
    params
        .into_iter()
        .flat_map(|p| p.grad.data())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so that their joint L2 norm does not exceed
/// `threshold`. Returns the scale applied (1 when no clipping happened).
pub fn clip_gradients(params: &mut [&mut Parameter], threshold: f64) -> f64 {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = global_grad_norm(params.iter().map(|p| &**p));
    if norm <= threshold {
        return 1.0;
    }
    let scale = threshold / norm;
    for p in params.iter_mut() {
        p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
    }
    scale
}
