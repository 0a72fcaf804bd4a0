//! The static reference column must agree with the published table it cites.

use sentprobe::eval::paper_reference;

fn table_row(doc: &str, label: &str, row: &str) -> Vec<f64> {
    let end = doc.find(&format!("\\label{{{label}}}")).expect("table label");
    let start = doc[..end].rfind("\\begin{tabular}").expect("tabular");
    let line = doc[start..end]
        .lines()
        .find(|l| l.trim_start().starts_with(&format!("\\bf {row} &")))
        .expect("row");
    line.split('&').skip(1).map(|c| c.replace("\\%", "").replace("\\\\", "").trim().parse::<f64>().unwrap() / 100.0).collect()
}

#[test]
fn reference_column_matches_published_table() {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../paper.md")).unwrap();
    for (row, suffix) in [("Original", ""), ("Permuted", ":permuted")] {
        let published = table_row(&doc, "acc_skipthought", row);
        let ours: Vec<f64> = ["length", "content", "order"]
            .iter()
            .map(|t| paper_reference(&format!("{t}{suffix}"), "external").unwrap())
            .collect();
        assert_eq!(published.len(), 3);
        for (a, b) in ours.iter().zip(&published) {
            assert!((a - b).abs() < 1e-12, "{row}: {ours:?} vs {published:?}");
        }
    }
    assert_eq!(paper_reference("length", "cbow"), None);
    assert_eq!(paper_reference("order_no_sentence", "external"), None);
}
