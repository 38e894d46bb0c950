//! Run artifacts: canonical CSV tables, a JSON report, and stable float
//! formatting so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Canonical float rendering for CSV cells: scientific with 12 significant
/// digits, negative zero collapsed, specials spelled out.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.12e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{}", fmt_float(*v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// What one executed scenario produced, before any files are written.
#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub checks: Vec<CheckResult>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    /// Sampling produced warnings strong enough that a passing verdict
    /// should not be trusted.
    pub shaky: bool,
}

impl TaskOutcome {
    pub fn new() -> Self {
        Self {
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
            shaky: false,
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(CheckResult::new(name, pass, detail));
    }

    pub fn verdict(&self) -> Verdict {
        if self.checks.iter().any(|c| !c.pass) {
            Verdict::Fail
        } else if self.shaky {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }
}

impl Default for TaskOutcome {
    fn default() -> Self {
        Self::new()
    }
}

pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub task: String,
    pub verdict: Verdict,
    pub config_sha256: String,
    pub checks: Vec<CheckResult>,
    pub tables: Vec<String>,
    pub figures: Vec<String>,
    pub notes: Vec<String>,
}

pub struct WrittenFiles {
    pub csv_paths: Vec<PathBuf>,
    pub figure_paths: Vec<PathBuf>,
    pub report_path: PathBuf,
}

/// Writes every table as CSV, optional figures, and the JSON report.
/// The scenario is the only writer to its own file stem, so a directory can
/// hold many scenarios side by side.
pub fn write_outputs(
    name: &str,
    task_tag: &str,
    config_text: &str,
    outcome: &TaskOutcome,
    figures: &[(String, String)],
    out_dir: &Path,
) -> std::io::Result<WrittenFiles> {
    fs::create_dir_all(out_dir)?;
    let mut csv_paths = Vec::new();
    for table in &outcome.tables {
        let path = out_dir.join(format!("{name}_{}.csv", table.name));
        fs::write(&path, table.to_csv())?;
        csv_paths.push(path);
    }
    let mut figure_paths = Vec::new();
    for (figure_name, svg) in figures {
        let path = out_dir.join(format!("{name}_{figure_name}.svg"));
        fs::write(&path, svg)?;
        figure_paths.push(path);
    }
    let report = RunReport {
        scenario: name.to_string(),
        task: task_tag.to_string(),
        verdict: outcome.verdict(),
        config_sha256: config_hash(config_text),
        checks: outcome.checks.clone(),
        tables: csv_paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        figures: figure_paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        notes: outcome.notes.clone(),
    };
    let report_path = out_dir.join(format!("{name}_report.json"));
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(&report_path, text)?;
    Ok(WrittenFiles {
        csv_paths,
        figure_paths,
        report_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_stable() {
        assert_eq!(fmt_float(1.5), "1.500000000000e0");
        assert_eq!(fmt_float(-0.0), "0.000000000000e0");
        assert_eq!(fmt_float(0.1 + 0.2), "3.000000000000e-1");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_float(6.02214076e23), "6.022140760000e23");
    }

    #[test]
    fn csv_is_deterministic() {
        let mut t = Table::new("profile", &["t", "sigma"]);
        t.push(vec![0.1, 2.5000001]);
        t.push(vec![0.2, 1.0 / 3.0]);
        let a = t.to_csv();
        let b = t.to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("t,sigma\n"));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn verdict_aggregates_checks() {
        let mut o = TaskOutcome::new();
        o.check("a", true, "ok".into());
        assert_eq!(o.verdict(), Verdict::Pass);
        o.shaky = true;
        assert_eq!(o.verdict(), Verdict::Inconclusive);
        o.check("b", false, "bad".into());
        assert_eq!(o.verdict(), Verdict::Fail);
    }

    #[test]
    fn hash_matches_known_vector() {
        // SHA-256 of the empty string.
        assert_eq!(
            config_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
