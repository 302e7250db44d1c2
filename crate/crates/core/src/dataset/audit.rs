use std::fmt;

use super::{Dataset, Metric};

/// Data-quality findings that affect effort ranking and log transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Rows (0-based) with `lt = 0` and `la > 0` or `ld > 0`.
    pub raw_churn_rows: Vec<usize>,
    /// Number of exact zeros per log-designated column.
    pub zero_value_counts: Vec<(Metric, usize)>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn has_findings(&self) -> bool {
        !self.raw_churn_rows.is_empty() || self.zero_value_counts.iter().any(|(_, n)| *n > 0)
    }

    pub fn zeros(&self, metric: Metric) -> Option<usize> {
        self.zero_value_counts
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, n)| *n)
    }
}

pub fn audit_dataset(d: &Dataset, log_columns: &[Metric]) -> AuditReport {
    let raw_churn_rows: Vec<usize> = d
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_raw_churn())
        .map(|(i, _)| i)
        .collect();

    let mut zero_value_counts = Vec::with_capacity(log_columns.len());
    for &m in log_columns {
        if zero_value_counts.iter().any(|(seen, _)| *seen == m) {
            continue;
        }
        let zeros = d.records().iter().filter(|r| r.get(m) == 0.0).count();
        zero_value_counts.push((m, zeros));
    }

    let mut notes = Vec::new();
    if !raw_churn_rows.is_empty() {
        notes.push(format!(
            "{} row(s) have lt=0 with non-zero la/ld; their la/ld are raw line counts, not ratios, \
             and effort ranking uses them as stored",
            raw_churn_rows.len()
        ));
    }
    let zero_cols: Vec<String> = zero_value_counts
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(m, n)| format!("{m}={n}"))
        .collect();
    if !zero_cols.is_empty() {
        notes.push(format!(
            "zeros in log-designated columns ({}); a strict natural log would produce -inf",
            zero_cols.join(", ")
        ));
    }

    AuditReport {
        raw_churn_rows,
        zero_value_counts,
        notes,
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "raw churn rows: {}", self.raw_churn_rows.len())?;
        if !self.raw_churn_rows.is_empty() {
            let shown: Vec<String> = self.raw_churn_rows.iter().take(20).map(|i| i.to_string()).collect();
            let more = if self.raw_churn_rows.len() > 20 { ", ..." } else { "" };
            writeln!(f, "  rows: {}{more}", shown.join(", "))?;
        }
        writeln!(f, "zero counts in log columns:")?;
        for (m, n) in &self.zero_value_counts {
            writeln!(f, "  {:<8} {n}", m.name())?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}
