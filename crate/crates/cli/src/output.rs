//! Delimiter-separated report rows.
//!
//! One row per experiment arm, header first. Every value except the two
//! timing columns is deterministic for a fixed config and seed; the timing
//! columns are wall-clock and marked as such in the header comment.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use tiltmc::engine::{EstimateMode, EstimateReport};

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub experiment: String,
    pub mode: String,
    pub estimate: f64,
    pub variance: f64,
    pub std_error: f64,
    pub vr_factor: Option<f64>,
    pub iterations: Option<usize>,
    pub search_time_s: f64,
    pub estimate_time_s: f64,
    pub seed: u64,
    pub config_hash: u64,
    pub note: String,
}

impl ReportRow {
    pub fn from_report(
        experiment: impl Into<String>,
        report: &EstimateReport<f64>,
        config_hash: u64,
        note: impl Into<String>,
    ) -> Self {
        let mode = match report.mode {
            EstimateMode::Crude => "crude",
            EstimateMode::CrudeConditional => "crude_cond",
            EstimateMode::ImportanceSampling => "is",
        };
        Self {
            experiment: experiment.into(),
            mode: mode.to_string(),
            estimate: report.estimate,
            variance: report.per_sample_variance,
            std_error: report.std_error,
            vr_factor: report.vr_factor,
            iterations: report.newton_iterations,
            search_time_s: report.search_time_s,
            estimate_time_s: report.estimate_time_s,
            seed: report.seed,
            config_hash,
            note: String::new(),
        }
        .with_note(note)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

pub struct Report {
    pub comments: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new() -> Self {
        Self {
            comments: vec![
                "search_time_s and estimate_time_s are wall-clock and not deterministic"
                    .to_string(),
            ],
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, text: impl Into<String>) {
        self.comments.push(text.into());
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn render(&self, delimiter: char) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let header = [
            "experiment",
            "mode",
            "estimate",
            "variance",
            "std_error",
            "vr_factor",
            "iterations",
            "search_time_s",
            "estimate_time_s",
            "seed",
            "config_hash",
            "note",
        ];
        let _ = writeln!(out, "{}", header.join(&delimiter.to_string()));
        for r in &self.rows {
            let vr = r.vr_factor.map(|v| format!("{v:.1}")).unwrap_or_default();
            let iters = r.iterations.map(|v| v.to_string()).unwrap_or_default();
            let cols = [
                r.experiment.clone(),
                r.mode.clone(),
                format!("{:e}", r.estimate),
                format!("{:e}", r.variance),
                format!("{:e}", r.std_error),
                vr,
                iters,
                format!("{:.3}", r.search_time_s),
                format!("{:.3}", r.estimate_time_s),
                r.seed.to_string(),
                format!("{:016x}", r.config_hash),
                r.note.clone(),
            ];
            let _ = writeln!(out, "{}", cols.join(&delimiter.to_string()));
        }
        out
    }

    pub fn write(&self, path: &Path, delimiter: char) -> io::Result<()> {
        fs::write(path, self.render(delimiter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_header_and_rows() {
        let mut report = Report::new();
        report.push(ReportRow {
            experiment: "x".into(),
            mode: "is".into(),
            estimate: 1.5e-3,
            variance: 2.0e-8,
            std_error: 4.5e-6,
            vr_factor: Some(12.0),
            iterations: Some(7),
            search_time_s: 0.5,
            estimate_time_s: 0.25,
            seed: 42,
            config_hash: 0xabc,
            note: "".into(),
        });
        let text = report.render(',');
        assert!(text.contains("experiment,mode,estimate"));
        assert!(text.contains("x,is,1.5e-3,2e-8,4.5e-6,12.0,7,0.500,0.250,42"));
    }
}
