//! Evaluation report: per-mode outcome counts rendered as the classic
//! four-column results table, plus per-sentence details and quality
//! filter agreement for the JSON side.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Glr,
    GlrstarSimple,
    GlrstarFull,
}

impl Mode {
    pub fn display_name(&self) -> &'static str {
        match self {
            Mode::Glr => "GLR",
            Mode::GlrstarSimple => "GLR* (1)",
            Mode::GlrstarFull => "GLR* (2)",
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Mode::Glr => "glr",
            Mode::GlrstarSimple => "glrstar-simple",
            Mode::GlrstarFull => "glrstar-full",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: Mode,
    pub unparsable: usize,
    pub parsable: usize,
    pub good_close: usize,
    pub bad: usize,
}

/// Per-mode quality filter agreement against the judged outcomes.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AgreementRow {
    pub mode: Mode,
    pub flagged_bad: usize,
    pub judged_bad: usize,
    pub kept_good: usize,
    pub judged_good: usize,
}

#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct SentenceOutcome {
    pub status: String,
    pub skips: u32,
    pub substitutions: u32,
    pub fragments: u32,
    pub score: f64,
    /// Judgment of the selected parse: good, bad, or null when nothing to
    /// judge against (no parse, or no gold information).
    pub label: Option<String>,
    pub quality: Option<String>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SentenceDetail {
    pub index: usize,
    pub sentence: String,
    pub modes: BTreeMap<String, SentenceOutcome>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub rows: Vec<ModeRow>,
    #[serde(default)]
    pub agreement: Vec<AgreementRow>,
    #[serde(default)]
    pub details: Vec<SentenceDetail>,
}

fn cell(count: usize, total: usize) -> String {
    let pct = if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 };
    format!("{count} ({pct:.1}%)")
}

/// The results table alone, in the published layout: caption, heuristic
/// legend, then one row per mode with count (percent) cells.
pub fn render_table(report: &EvalReport) -> String {
    let header = ["Mode", "Unparsable", "Parsable", "Good/Close", "Bad"];
    let mut grid: Vec<[String; 5]> = vec![header.map(str::to_string)];
    for row in &report.rows {
        grid.push([
            row.mode.display_name().to_string(),
            cell(row.unparsable, report.total),
            cell(row.parsable, report.total),
            cell(row.good_close, report.total),
            cell(row.bad, report.total),
        ]);
    }
    let widths: Vec<usize> =
        (0..5).map(|c| grid.iter().map(|r| r[c].len()).max().unwrap()).collect();

    let mut out = String::new();
    out.push_str("Performance Results of the GLR* Parser\n");
    out.push_str("(1) = simple heuristic, (2) = full heuristics\n\n");
    for row in &grid {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c + 1 == row.len() {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{cell:<width$}  ", width = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Full human-readable report: the table, then filter agreement when any
/// sentences carried gold information.
pub fn render_text(report: &EvalReport) -> String {
    let mut out = render_table(report);
    if !report.agreement.is_empty() {
        out.push('\n');
        for a in &report.agreement {
            let _ = writeln!(
                out,
                "{}: quality filter flagged {} of {} bad parses, kept {} of {} good/close parses",
                a.mode.display_name(),
                a.flagged_bad,
                a.judged_bad,
                a.kept_good,
                a.judged_good,
            );
        }
    }
    out
}
