//! Executable oracle suite: gradient checks on every hand-derived backward
//! pass, plus closed-form checks on the hierarchical softmax, the t-test and
//! BLEU.

use std::f64::consts::PI;

use sentprobe::corpus::build_vocab;
use sentprobe::encoders::{EdModel, SkipGramModel};
use sentprobe::eval::{bleu, paired_t_test, spearman};
use sentprobe::nncore::{grad_check, softmax_cross_entropy, LinearLayer, LstmCellParams, Parameterized};
use sentprobe::probe::ProbeMLP;
use sentprobe::rng;

/// Gradient checks must agree to this relative error.
pub const GRAD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<28} error {:.3e} (tolerance {:.0e}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            if self.detail.is_empty() { String::new() } else { format!("  {}", self.detail) }
        )
    }
}

fn check(name: &'static str, r: sentprobe::Result<f64>, tolerance: f64) -> CheckResult {
    match r {
        Ok(v) => CheckResult { name, value: v, tolerance, passed: v.is_finite() && v < tolerance, detail: String::new() },
        Err(e) => CheckResult { name, value: f64::NAN, tolerance, passed: false, detail: e.to_string() },
    }
}

fn scale_params(m: &mut impl Parameterized, k: f64) {
    for p in m.params_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v *= k);
    }
}

fn linear_ce() -> sentprobe::Result<f64> {
    let mut layer = LinearLayer::new(6, 4, &mut rng::seeded(3));
    let x = [0.2, -0.5, 1.0, 0.7, -1.3, 0.4];
    grad_check(
        &mut layer,
        |l| l.params_mut(),
        |l, backward| {
            let (loss, g) = softmax_cross_entropy(&l.forward(&x)?, 2)?;
            if backward {
                l.backward(&x, &g);
            }
            Ok(loss)
        },
        1e-5,
    )
}

fn lstm_step() -> sentprobe::Result<f64> {
    let mut cell = LstmCellParams::new(3, 4, &mut rng::seeded(11));
    scale_params(&mut cell, 5.0);
    let (x, h0, c0) = ([0.3, -0.7, 1.1], [0.1, -0.2, 0.3, 0.05], [0.5, -0.4, 0.2, 0.9]);
    let proj = [1.0, -2.0, 0.5, 1.5];
    grad_check(
        &mut cell,
        |c| c.params_mut(),
        |c, backward| {
            let s = c.step(&x, &h0, &c0)?;
            let loss = s.h.iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * s.c.iter().map(|v| v * v).sum::<f64>();
            if backward {
                c.backward(&s, &proj, &s.c.clone());
            }
            Ok(loss)
        },
        1e-6,
    )
}

fn probe_mlp() -> sentprobe::Result<f64> {
    let mut m = ProbeMLP::new(5, 3, 0.5, 2)?;
    scale_params(&mut m, 5.0);
    let x = [0.4, -1.2, 0.8, 0.1, -0.3];
    grad_check(
        &mut m,
        |m| m.params_mut(),
        |m, backward| m.loss(&x, 1, Some(&mut rng::seeded(4)), backward.then_some(1.0)),
        1e-6,
    )
}

fn ed_unroll() -> sentprobe::Result<f64> {
    let mut m = EdModel::new(8, 4, 3)?;
    scale_params(&mut m, 4.0);
    // five words: a full encoder pass and a six-step decoder pass
    let tokens = [2usize, 5, 1, 7, 0];
    grad_check(
        &mut m,
        |m| m.params_mut(),
        |m, backward| Ok(m.sentence_loss(&tokens, None, backward.then_some(1.0))?.loss),
        1e-5,
    )
}

/// Largest `|1 - sum_w P(w | c)|` over every centre word.
fn hs_normalization() -> sentprobe::Result<f64> {
    let sentences: Vec<Vec<String>> =
        (0..30).map(|i| (0..(i % 7 + 3)).map(|j| format!("w{}", (i * j + j) % 23)).collect()).collect();
    let vocab = build_vocab(&sentences, 100)?;
    let mut m = SkipGramModel::new(&vocab, 8, 2, 5)?;
    m.randomize_nodes(6);
    let mut worst: f64 = 0.0;
    for c in 0..vocab.len() {
        let total = (0..vocab.len()).map(|w| m.hs_probability(c, w)).sum::<sentprobe::Result<f64>>()?;
        worst = worst.max((1.0 - total).abs());
    }
    Ok(worst)
}

/// Student t CDF with three degrees of freedom, in closed form.
fn t3_cdf(t: f64) -> f64 {
    let u = t / 3f64.sqrt();
    0.5 + (u / (1.0 + u * u) + u.atan()) / PI
}

fn t_test() -> sentprobe::Result<f64> {
    let a = [1.0, 2.0, 3.0, 4.0];
    let b = [0.0; 4];
    let r = paired_t_test(&a, &b)?;
    // mean 2.5, sample sd sqrt(5/3), n 4
    let t = 2.5 / ((5.0f64 / 3.0).sqrt() / 2.0);
    let p = 2.0 * (1.0 - t3_cdf(t));
    Ok((r.t - t).abs().max((r.p_value - p).abs()).max((r.df - 3.0).abs()))
}

fn bleu_examples() -> sentprobe::Result<f64> {
    let cand = vec!["the"; 7];
    let refr = vec!["the", "cat", "is", "on", "the", "mat"];
    // two clipped unigram matches out of seven, no brevity penalty
    let clipped = bleu(&[cand], std::slice::from_ref(&refr), 1)?;
    let exact = bleu(std::slice::from_ref(&refr), std::slice::from_ref(&refr), 4)?;
    Ok((clipped.score - 2.0 / 7.0).abs().max((exact.score - 1.0).abs()))
}

fn spearman_monotone() -> sentprobe::Result<f64> {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| x.exp()).collect();
    let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
    Ok((spearman(&xs, &ys)? - 1.0).abs().max((spearman(&xs, &neg)? + 1.0).abs()))
}

/// Runs every check; nothing here depends on external data.
pub fn run_selfcheck() -> Vec<CheckResult> {
    vec![
        check("grad linear+cross-entropy", linear_ce(), GRAD_TOLERANCE),
        check("grad lstm step", lstm_step(), GRAD_TOLERANCE),
        check("grad probe mlp", probe_mlp(), GRAD_TOLERANCE),
        check("grad encoder-decoder unroll", ed_unroll(), GRAD_TOLERANCE),
        check("hierarchical softmax sum", hs_normalization(), 1e-10),
        check("paired t-test oracle", t_test(), 1e-9),
        check("bleu examples", bleu_examples(), 1e-12),
        check("spearman monotone", spearman_monotone(), 1e-12),
    ]
}
