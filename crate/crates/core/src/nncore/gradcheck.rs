use super::Parameter;
use crate::{Error, Result};

/// Gradients smaller than this are compared in absolute rather than relative terms.
const REL_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, 1e-4)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients against central finite differences.
///
/// `loss(model, backward)` must evaluate the loss deterministically and, when
/// `backward` is true, accumulate analytic gradients into the parameters that
/// `params` exposes. Returns the maximum relative error over all entries.
pub fn grad_check<M>(
    model: &mut M,
    params: fn(&mut M) -> Vec<&mut Parameter>,
    mut loss: impl FnMut(&mut M, bool) -> Result<f64>,
    eps: f64,
) -> Result<f64> {
    for p in params(model) {
        p.zero_grad();
    }
    let base = loss(model, true)?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss is {base}")));
    }
    let analytic: Vec<Vec<f64>> = params(model)
        .into_iter()
        .map(|p| p.grad.data().to_vec())
        .collect();

    let mut worst: f64 = 0.0;
    for (pi, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = params(model)[pi].value.data()[j];
            params(model)[pi].value.data_mut()[j] = orig + eps;
            let plus = loss(model, false)?;
            params(model)[pi].value.data_mut()[j] = orig - eps;
            let minus = loss(model, false)?;
            params(model)[pi].value.data_mut()[j] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss became non-finite while perturbing parameter {pi} entry {j}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    for p in params(model) {
        p.zero_grad();
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{softmax_cross_entropy, LinearLayer, Parameterized, Tensor};
    use crate::rng;

    #[test]
    fn quadratic_loss_matches_exactly() {
        let mut p = Parameter::new(Tensor::from_vec(vec![0.3, -1.2, 2.5, 0.01]));
        let err = grad_check(
            &mut p,
            |p| vec![p],
            |p, backward| {
                let loss = 0.5 * p.value.data().iter().map(|v| v * v).sum::<f64>();
                if backward {
                    let v = p.value.data().to_vec();
                    p.grad.data_mut().copy_from_slice(&v);
                }
                Ok(loss)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn linear_softmax_composite() {
        let mut layer = LinearLayer::new(6, 4, &mut rng::seeded(3));
        let x = [0.2, -0.5, 1.0, 0.7, -1.3, 0.4];
        let err = grad_check(
            &mut layer,
            |l| l.params_mut(),
            |l, backward| {
                let z = l.forward(&x)?;
                let (loss, g) = softmax_cross_entropy(&z, 2)?;
                if backward {
                    l.backward(&x, &g);
                }
                Ok(loss)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut p = Parameter::new(Tensor::from_vec(vec![1.0, 2.0]));
        let err = grad_check(
            &mut p,
            |p| vec![p],
            |p, backward| {
                let loss = p.value.data().iter().map(|v| v * v).sum::<f64>();
                if backward {
                    // missing factor of two
                    let v = p.value.data().to_vec();
                    p.grad.data_mut().copy_from_slice(&v);
                }
                Ok(loss)
            },
            1e-5,
        )
        .unwrap();
        assert!(err > 0.4);
    }

    #[test]
    fn non_finite_loss_fails_the_check() {
        let mut p = Parameter::new(Tensor::from_vec(vec![1.0]));
        let r = grad_check(&mut p, |p| vec![p], |_, _| Ok(f64::NAN), 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
