//! Evaluation instruments: BLEU, paired t-tests, rank correlation, curves
//! over sentence length, and report emission.

mod bleu;
mod curves;
mod report;
mod stats;

pub use crate::encoders::write_sentence_vectors;
pub use bleu::{bleu, BleuReport, DEFAULT_MAX_N};
pub use curves::{content_accuracy_by_length, norm_length_curve, CurvePoint};
pub use report::{emit_report, paper_reference, read_report_csv, ReportRow, CSV_HEADER};
pub use stats::{ln_gamma, paired_t_test, regularized_incomplete_beta, spearman, student_t_two_tailed, TTestResult};
