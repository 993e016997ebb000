//! Evaluation report writers.

use std::fmt::Write as _;

use xltag_core::combine::EvalReport;
use xltag_core::corpus::TagSet;

/// How μ was obtained for a combined run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuChoice {
    /// No combination (single system).
    None,
    Fixed(f64),
    /// μ tuned on the first and on the second half of the test corpus.
    Folds(f64, f64),
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

/// Machine-readable `key=value` lines.
pub fn to_key_values(report: &EvalReport, mu: MuChoice) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "accuracy_all={}", opt(report.accuracy()));
    let _ = writeln!(out, "accuracy_oov={}", opt(report.oov_accuracy()));
    let _ = writeln!(out, "tokens_total={}", report.total);
    let _ = writeln!(out, "tokens_correct={}", report.correct);
    let _ = writeln!(out, "oov_total={}", report.oov_total);
    let _ = writeln!(out, "oov_correct={}", report.oov_correct);
    match mu {
        MuChoice::None => {}
        MuChoice::Fixed(m) => {
            let _ = writeln!(out, "mu={m}");
        }
        MuChoice::Folds(a, b) => {
            let _ = writeln!(out, "mu_fold1={a}");
            let _ = writeln!(out, "mu_fold2={b}");
        }
    }
    out
}

pub fn to_text(title: &str, report: &EvalReport, tagset: &TagSet, mu: MuChoice) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "=".repeat(title.chars().count()));
    let _ = writeln!(
        out,
        "OOV tokens: words with an empty common vector on their side."
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "all tokens   {:>8} / {:<8} {}",
        report.correct,
        report.total,
        pct(report.accuracy())
    );
    let _ = writeln!(
        out,
        "OOV tokens   {:>8} / {:<8} {}",
        report.oov_correct,
        report.oov_total,
        pct(report.oov_accuracy())
    );
    match mu {
        MuChoice::None => {}
        MuChoice::Fixed(m) => {
            let _ = writeln!(out, "mu           {m} (fixed)");
        }
        MuChoice::Folds(a, b) => {
            let _ = writeln!(out, "mu           fold 1: {a}  fold 2: {b}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion (rows gold, columns predicted)");
    let width = tagset.labels().iter().map(|l| l.chars().count()).max().unwrap_or(1).max(6);
    let _ = write!(out, "{:>width$}", "");
    for l in tagset.labels() {
        let _ = write!(out, " {l:>width$}");
    }
    let _ = writeln!(out);
    for (g, row) in report.confusion.iter().enumerate() {
        let _ = write!(out, "{:>width$}", tagset.label(g));
        for c in row {
            let _ = write!(out, " {c:>width$}");
        }
        let _ = writeln!(out);
    }
    out
}
