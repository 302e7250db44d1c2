use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiment::{ExperimentReport, ExperimentSpec};
use crate::error::{Error, Result};

/// Marker line that precedes the embedded configuration.
pub const CONFIG_MARKER: &str = "--- config ---";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl ReportFormat {
    /// `.csv` files are CSV, anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Text,
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{:.2}%", 100.0 * x))
}

impl ExperimentReport {
    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Csv => self.render_csv(),
            ReportFormat::Text => self.render_text(),
        }
    }

    fn header_lines(&self) -> Vec<String> {
        vec![
            format!("jitlab experiment report: {}", self.project),
            format!("changes: {}, defect-inducing: {}", self.n_rows, self.n_defect),
        ]
    }

    /// Detail rows per fold followed by one `all,mean` row per combination,
    /// after a commented configuration block.
    pub fn render_csv(&self) -> Result<String> {
        let mut out = String::new();
        for line in self.header_lines() {
            writeln!(out, "# {line}").unwrap();
        }
        writeln!(out, "# {CONFIG_MARKER}").unwrap();
        for line in self.spec.to_toml()?.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                writeln!(out, "# {line}").unwrap();
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["features", "repetition", "fold", "recall", "precision"])?;
        for c in &self.results {
            let label = c.label();
            for f in &c.folds {
                w.write_record([
                    label.clone(),
                    f.repetition.to_string(),
                    f.fold.to_string(),
                    cell(f.recall),
                    cell(f.precision),
                ])?;
            }
            w.write_record([
                label,
                "all".into(),
                "mean".into(),
                cell(c.mean_recall()),
                cell(c.mean_precision()),
            ])?;
        }
        let body = w.into_inner().map_err(|e| Error::Spec(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        Ok(out)
    }

    /// Human-readable ranking table followed by the TOML configuration.
    pub fn render_text(&self) -> Result<String> {
        let mut out = String::new();
        for line in self.header_lines() {
            writeln!(out, "{line}").unwrap();
        }
        out.push('\n');
        let width = self
            .results
            .iter()
            .map(|c| c.label().len())
            .chain(["features".len()])
            .max()
            .unwrap_or(8);
        writeln!(
            out,
            "{:>4}  {:<width$}  {:>11}  {:>14}  {:>5}",
            "rank", "features", "mean recall", "mean precision", "folds"
        )
        .unwrap();
        for (i, c) in self.results.iter().enumerate() {
            writeln!(
                out,
                "{:>4}  {:<width$}  {:>11}  {:>14}  {:>5}",
                i + 1,
                c.label(),
                percent(c.mean_recall()),
                percent(c.mean_precision()),
                c.folds.len()
            )
            .unwrap();
        }
        if self.spec.repetitions > 1 {
            out.push('\n');
            writeln!(out, "per-repetition mean recall:").unwrap();
            for c in &self.results {
                let reps: Vec<String> = (0..self.spec.repetitions)
                    .map(|r| percent(c.repetition_recall(r)))
                    .collect();
                writeln!(out, "  {:<width$}  {}", c.label(), reps.join(" ")).unwrap();
            }
        }
        out.push('\n');
        writeln!(out, "{CONFIG_MARKER}").unwrap();
        out.push_str(&self.spec.to_toml()?);
        Ok(out)
    }

    pub fn emit(&self, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
        if self.results.is_empty() {
            return Err(Error::Empty("report has no results".into()));
        }
        let path = path.as_ref();
        let text = self.render(format)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Recovers the configuration embedded in a rendered report of either format.
pub fn spec_from_report(text: &str) -> Result<ExperimentSpec> {
    let mut lines = text.lines();
    let marker = lines
        .by_ref()
        .find(|l| l.trim_start_matches("# ").trim() == CONFIG_MARKER)
        .ok_or_else(|| Error::Spec("report has no embedded configuration".into()))?;
    let toml_text: String = if marker.starts_with('#') {
        lines
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        lines.collect::<Vec<_>>().join("\n")
    };
    ExperimentSpec::from_toml(&toml_text, None)
}
