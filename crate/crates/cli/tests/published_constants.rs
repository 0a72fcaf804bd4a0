//! The paper-scale profile reproduces the published experimental constants,
//! read from the source document rather than restated here.

use sentprobe::tasks::LengthBins;
use sentprobe_cli::{EncoderSpec, Profile};

fn document() -> String {
    let raw = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../paper.md")).unwrap();
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The text between `before` and the next occurrence of `after`.
fn between<'a>(doc: &'a str, before: &str, after: &str) -> &'a str {
    let start = doc.find(before).unwrap_or_else(|| panic!("`{before}` not found")) + before.len();
    let len = doc[start..].find(after).unwrap_or_else(|| panic!("`{after}` not found after `{before}`"));
    doc[start..start + len].trim()
}

fn number(s: &str) -> f64 {
    s.replace(',', "").parse().unwrap_or_else(|_| panic!("`{s}` is not a number"))
}

#[test]
fn corpus_scale_and_filters() {
    let doc = document();
    let p = Profile::Paper.defaults();
    assert_eq!(between(&doc, "models are trained on", "million sentences"), "1");
    assert_eq!(p.max_sentences, 1_000_000);
    assert_eq!(p.vocab_cap as f64, number(between(&doc, "vocabulary size of", "tokens")));
    assert_eq!(p.min_len as f64, number(between(&doc, "sentence lengths to be between", "and")));
    assert_eq!(p.max_len as f64, number(between(&doc, "sentence lengths to be between 5 and", "words")));
    let train = number(between(&doc, "Wikipedia sentences, where", "sentences are used to generate"));
    let each = number(between(&doc, "training examples, and", "sentences are used for each"));
    assert_eq!(p.split.map(|x| x as f64), [train, each, each]);
}

#[test]
fn embedding_sizes() {
    let doc = document();
    let set: Vec<usize> = between(&doc, "k \\in \\{", "\\}").split(',').map(|x| x.trim().parse().unwrap()).collect();
    for e in Profile::Paper.defaults().encoders {
        match e {
            EncoderSpec::Cbow { dims } | EncoderSpec::Ed { dims } => assert_eq!(dims, set),
            EncoderSpec::External { .. } => {}
        }
    }
}

#[test]
fn training_recipes() {
    let doc = document();
    let p = Profile::Paper.defaults();
    let ed = between(&doc, "with mini-batches of", "and the AdaGrad optimizer");
    assert_eq!(ed, format!("{} sentences, learning rate of {}, dropout rate of {},", p.ed.batch_size, p.ed.lr, p.ed.dropout));
    let patience = number(between(&doc, "training takes approximately 10 days and is stopped after", "epochs"));
    assert_eq!(p.ed.patience as f64, patience);
    let probe = between(&doc, "We use a dropout rate of", "epochs with no loss improvement on the development set");
    assert_eq!(probe, format!("{} and a learning rate of {}. Training is stopped after {}", p.probe.dropout, p.probe.lr, p.probe.patience));
}

#[test]
fn length_bins() {
    let doc = document();
    let text = between(&doc, "\\footnote{We use the bins", ".}");
    let bins: Vec<(usize, usize)> = text
        .split("),")
        .map(|b| {
            let b = b.trim().trim_matches(|c| c == '(' || c == ')');
            let (lo, hi) = b.split_once('-').unwrap();
            (lo.parse().unwrap(), hi.parse().unwrap())
        })
        .collect();
    assert_eq!(LengthBins::default().bins(), &bins[..]);
}
