//! Statistics checked against an independent implementation.

use proptest::prelude::*;
use sentprobe::eval::{ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_two_tailed};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn statrs_two_tailed(t: f64, df: f64) -> f64 {
    let d = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * d.cdf(-t.abs())
}

#[test]
fn ln_gamma_matches_reference() {
    for &x in &[0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 55.5, 171.0, 1e4] {
        let (a, b) = (ln_gamma(x), statrs::function::gamma::ln_gamma(x));
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "x {x}: {a} vs {b}");
    }
}

proptest! {
    #[test]
    fn incomplete_beta_matches_reference(a in 0.05f64..200.0, b in 0.05f64..200.0, x in 0.0f64..=1.0) {
        let (ours, theirs) = (regularized_incomplete_beta(a, b, x), statrs::function::beta::beta_reg(a, b, x));
        prop_assert!((ours - theirs).abs() < 1e-9, "I_{x}({a}, {b}) = {ours} vs {theirs}");
    }

    #[test]
    fn two_tailed_p_matches_reference(t in -50.0f64..50.0, df in 1u32..5000) {
        let df = f64::from(df);
        let (ours, theirs) = (student_t_two_tailed(t, df), statrs_two_tailed(t, df));
        prop_assert!((ours - theirs).abs() < 1e-9, "t {t} df {df}: {ours} vs {theirs}");
    }

    #[test]
    fn paired_test_on_correctness_bits(bits in prop::collection::vec((0u8..2, 0u8..2), 3..400)) {
        let (a, b): (Vec<u8>, Vec<u8>) = bits.into_iter().unzip();
        let d: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| f64::from(x) - f64::from(y)).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        match paired_t_test(&a, &b) {
            Ok(r) => {
                prop_assert!(var > 0.0);
                let t = mean / (var / n).sqrt();
                prop_assert!((r.t - t).abs() <= 1e-9 * t.abs().max(1.0));
                prop_assert_eq!(r.df, n - 1.0);
                prop_assert!((r.p_value - statrs_two_tailed(t, n - 1.0)).abs() < 1e-9);
            }
            Err(sentprobe::Error::Degenerate(_)) => prop_assert!(var == 0.0),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
