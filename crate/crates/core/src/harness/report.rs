use std::path::Path;

use super::Scenario;
use crate::error::Result;
use crate::io;

pub const RESYNTHESIZED_NOTE: &str = "resynthesized is reported as an alias of unprotected: without a vocoder in the loop the test vectors are unchanged";

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub eer: f64,
    pub threshold: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub coral_divergence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    /// Free-form tag, e.g. the CORAL fit size of a sweep entry.
    pub label: Option<String>,
    pub runs: Vec<RunResult>,
    pub mean_eer: f64,
    /// Sample standard deviation over runs; 0 for a single run.
    pub std_eer: f64,
    pub provenance: Vec<(String, String)>,
    pub notes: Vec<String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn new(scenario: Scenario, runs: Vec<RunResult>, provenance: Vec<(String, String)>) -> Self {
        let eers: Vec<f64> = runs.iter().map(|r| r.eer).collect();
        let (mean_eer, std_eer) = mean_std(&eers);
        Self {
            scenario,
            label: None,
            runs,
            mean_eer,
            std_eer,
            provenance,
            notes: Vec::new(),
        }
    }

    pub fn eers(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.eer).collect()
    }

    /// Mean and sample std recomputed from the per-run values.
    pub fn recompute(&self) -> (f64, f64) {
        mean_std(&self.eers())
    }

    pub fn mean_divergence(&self) -> Option<f64> {
        let d: Option<Vec<f64>> = self.runs.iter().map(|r| r.coral_divergence).collect();
        d.filter(|d| !d.is_empty())
            .map(|d| d.iter().sum::<f64>() / d.len() as f64)
    }

    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "summary scenario={} runs={} mean_eer={} std_eer={}",
            self.scenario,
            self.runs.len(),
            io::fmt_f64(self.mean_eer),
            io::fmt_f64(self.std_eer)
        );
        if let Some(label) = &self.label {
            s.push_str(&format!(" label={label}"));
        }
        if let Some(d) = self.mean_divergence() {
            s.push_str(&format!(" mean_coral_divergence={}", io::fmt_f64(d)));
        }
        s
    }

    /// Provenance as `#` lines, one TSV row per run, then the summary line.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = io::comment_block(comments);
        out.push_str(&format!("# scenario={}\n", self.scenario));
        out.push_str("# eer_method=linear-interpolation-at-crossing\n");
        for (k, v) in &self.provenance {
            out.push_str(&format!("# {k}={v}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("# note: {n}\n"));
        }
        out.push_str("scenario\trun\teer\tthreshold\tn_genuine\tn_impostor\tcoral_divergence\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                self.scenario,
                r.run,
                io::fmt_f64(r.eer),
                io::fmt_f64(r.threshold),
                r.n_genuine,
                r.n_impostor,
                r.coral_divergence.map(io::fmt_f64).unwrap_or_else(|| "-".into())
            ));
        }
        out.push_str(&self.summary_line());
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        io::write_atomic(path.as_ref(), &self.to_text(comments))
    }
}

/// Several reports concatenated, separated by blank lines.
pub fn reports_to_text(reports: &[ExperimentReport], comments: &[String]) -> String {
    let mut out = io::comment_block(comments);
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&r.to_text(&[]));
    }
    out
}
