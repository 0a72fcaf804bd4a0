use crate::{Error, Result};

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let (arg, m) = logits
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, z)| if z > best.1 { (i, z) } else { best });
    // log-sum-exp as m + ln(1 + rest) keeps precision when one logit dominates
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, z)| (z - m).exp())
        .sum();
    let tail = rest.ln_1p();
    logits.iter().map(|z| (z - m) - tail).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Returns `-log softmax(logits)[target]` and its gradient
/// `softmax(logits) - one_hot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::data(format!(
            "target class {target} out of range for {} logits",
            logits.len()
        )));
    }
    let logp = log_softmax(logits);
    let loss = -logp[target];
    let mut grad: Vec<f64> = logp.into_iter().map(f64::exp).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        for v in [2usize, 8, 50_000] {
            let (loss, _) = softmax_cross_entropy(&vec![0.37; v], v / 2).unwrap();
            assert!((loss - (v as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_logits() {
        let (loss, _) = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
        // -log sigmoid(20) = log(1 + e^-20)
        let expected = (-20f64).exp().ln_1p();
        assert!((loss - expected).abs() < 1e-20);
        assert!((loss - 2.061e-9).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_target() {
        assert!(softmax_cross_entropy(&[0.0, 1.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn gradient_sums_to_zero_and_loss_nonnegative(
            logits in prop::collection::vec(-30.0f64..30.0, 2..20),
            t in 0usize..20,
        ) {
            let t = t % logits.len();
            let (loss, grad) = softmax_cross_entropy(&logits, t).unwrap();
            prop_assert!(loss >= 0.0);
            prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
