//! Text renderings of a [`SummaryTable`].

use std::fmt::Write;

use super::{MethodSummary, SummaryTable, SIGNIFICANCE_LEVEL};

/// `mean±std` with one decimal and a trailing `*` when not significant.
pub fn format_cell(row: &MethodSummary) -> String {
    let star = if row.asterisk { "*" } else { "" };
    format!("{:.1}±{:.1}{star}", row.mean, row.std)
}

fn format_p(row: &MethodSummary) -> String {
    match (row.p_value, &row.test_note) {
        (Some(p), _) => format!("{p:.4}"),
        (None, Some(note)) => format!("n/a ({note})"),
        (None, None) => String::new(),
    }
}

pub fn render_markdown(table: &SummaryTable) -> String {
    let mut out = String::new();
    match &table.setting {
        Some(s) => {
            let _ = writeln!(
                out,
                "# Accuracy at attacked nodes: {}, {} labels per class, β = {}%, p = {}, {} embedding\n",
                s.dataset,
                s.per_class,
                s.beta * 100.0,
                s.p,
                s.embedder
            );
        }
        None => out.push_str("# Accuracy at attacked nodes\n\n"),
    }
    let _ = writeln!(
        out,
        "Mean ± {} standard deviation over {} trials, in percent. \
         `*` marks a method whose two-sided Wilcoxon signed-rank test against \
         Before Copying gives p ≥ {SIGNIFICANCE_LEVEL}.",
        table.std_convention, table.n_trials
    );
    if table.n_trials == 1 {
        out.push_str("\nWith a single trial every standard deviation is 0 and no test is run.\n");
    }
    if table.n_failed > 0 {
        let _ = writeln!(out, "\n{} trial(s) failed and are excluded.", table.n_failed);
    }
    out.push_str("\n| Method | Accuracy | p-value |\n|---|---|---|\n");
    for row in &table.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            row.method.title(),
            format_cell(row),
            format_p(row)
        );
    }
    out
}

pub fn render_csv(table: &SummaryTable) -> String {
    let mut out = String::from("method,mean,std,p_value,asterisk\n");
    for row in &table.rows {
        let p = row.p_value.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.method.key(),
            row.mean,
            row.std,
            p,
            row.asterisk
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{not_significant, Method};

    fn row(p: Option<f64>) -> MethodSummary {
        MethodSummary {
            method: Method::CopyingAverage,
            mean: 56.24,
            std: 6.18,
            p_value: p,
            test_note: None,
            asterisk: not_significant(p),
        }
    }

    #[test]
    fn asterisk_threshold() {
        assert_eq!(format_cell(&row(Some(0.04))), "56.2±6.2");
        assert_eq!(format_cell(&row(Some(0.06))), "56.2±6.2*");
        assert_eq!(format_cell(&row(Some(0.05))), "56.2±6.2*");
        assert_eq!(format_cell(&row(None)), "56.2±6.2*");
    }
}
