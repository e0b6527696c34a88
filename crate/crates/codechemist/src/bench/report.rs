//! Report rendering: JSON, CSV, and a markdown comparison table.
//!
//! Byte-deterministic for a given report: struct field order and BTreeMap
//! iteration fix the layout, pass@1 percentages print with one decimal.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, EvaluationReport, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    MarkdownTable,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::MarkdownTable => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown-table" | "markdown" | "md" => Ok(ReportFormat::MarkdownTable),
            other => Err(BenchError::DomainViolation(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

fn pct(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

fn delta_cell(delta: Option<f64>) -> String {
    match delta {
        None => "—".to_string(),
        Some(d) if d > 0.0 => format!("↑ {}", pct(d)),
        Some(d) if d < 0.0 => format!("↓ {}", pct(-d)),
        Some(_) => "0.0".to_string(),
    }
}

/// Renders the report to text in the requested format.
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> Result<String, BenchError> {
    if report.results.is_empty() {
        return Err(BenchError::ReportEmpty);
    }
    match format {
        ReportFormat::Json => {
            let mut text =
                serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            Ok(text)
        }
        ReportFormat::Csv => Ok(render_csv(report)),
        ReportFormat::MarkdownTable => Ok(render_markdown(report)),
    }
}

fn delta_for(report: &EvaluationReport, method: Method) -> Option<f64> {
    if method == Method::Vanilla {
        return None;
    }
    report.deltas_vs_vanilla.get(method.as_str()).copied()
}

fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::from(
        "method,pass_at_1,pass_at_1_pct,delta_vs_vanilla_pct,problems,graded_errors,wall_time_secs\n",
    );
    for result in &report.results {
        let delta = delta_for(report, result.method)
            .map(|d| pct(d))
            .unwrap_or_default();
        let wall = result
            .wall_time_secs
            .map(|w| format!("{w:.3}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            result.method,
            result.pass_at_1,
            pct(result.pass_at_1),
            delta,
            result.per_problem.len(),
            result.graded_errors.len(),
            wall,
        ));
    }
    out
}

fn render_markdown(report: &EvaluationReport) -> String {
    let mut out = format!("# Evaluation: {}\n\n", report.set_name);
    out.push_str("| Method | pass@1 (%) | Δ vs vanilla | Problems | Graded errors |\n");
    out.push_str("|---|---|---|---|---|\n");
    for result in &report.results {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            result.method,
            pct(result.pass_at_1),
            delta_cell(delta_for(report, result.method)),
            result.per_problem.len(),
            result.graded_errors.len(),
        ));
    }
    if !report.significance.is_empty() {
        out.push_str("\n## Significance\n\n");
        for (pair, p) in &report.significance {
            out.push_str(&format!("- p({pair}) = {p:.6}\n"));
        }
    }
    if report.has_graded_errors() {
        out.push_str("\n## Graded errors\n\n");
        for (result, err) in report
            .results
            .iter()
            .flat_map(|r| r.graded_errors.iter().map(move |e| (r, e)))
        {
            out.push_str(&format!(
                "- {} / `{}`: {}\n",
                result.method, err.problem_id, err.detail
            ));
        }
    }
    out
}

/// Writes the rendered report to `path`.
pub fn emit_report(
    report: &EvaluationReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), BenchError> {
    let text = render_report(report, format)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}
