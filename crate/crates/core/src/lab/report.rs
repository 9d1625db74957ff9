//! Report types and the file writer.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fit::FitResult;
use crate::rates::{DecayCurve, RateQuery};
use crate::zones::ZoneMap;

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    ComparisonFailure,
    InvariantViolation,
    Error,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::ComparisonFailure => 2,
            Status::InvariantViolation | Status::Error => 3,
        }
    }
}

/// How `measured` is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// |measured − predicted| ≤ tolerance
    Within,
    /// measured ≤ tolerance
    AtMost,
    /// measured ≥ tolerance
    AtLeast,
    /// measured = predicted (counts, flags)
    Equals,
    /// nothing to judge; the row is informational
    Reported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<RateQuery>,
    pub relation: Relation,
    pub predicted: Option<f64>,
    pub measured: Option<f64>,
    pub difference: Option<f64>,
    pub tolerance: Option<f64>,
    /// `None` for informational rows.
    pub pass: Option<bool>,
    /// The estimate the prediction or bound comes from.
    pub anchor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ComparisonRow {
    fn base(quantity: &str, relation: Relation, anchor: &str) -> Self {
        Self {
            quantity: quantity.into(),
            query: None,
            relation,
            predicted: None,
            measured: None,
            difference: None,
            tolerance: None,
            pass: None,
            anchor: anchor.into(),
            note: None,
        }
    }

    pub fn within(quantity: &str, predicted: f64, measured: f64, tolerance: f64, anchor: &str) -> Self {
        let d = (measured - predicted).abs();
        Self {
            predicted: Some(predicted),
            measured: Some(measured),
            difference: Some(d),
            tolerance: Some(tolerance),
            pass: Some(d <= tolerance),
            ..Self::base(quantity, Relation::Within, anchor)
        }
    }

    pub fn at_most(quantity: &str, measured: f64, bound: f64, anchor: &str) -> Self {
        Self {
            measured: Some(measured),
            tolerance: Some(bound),
            pass: Some(measured <= bound),
            ..Self::base(quantity, Relation::AtMost, anchor)
        }
    }

    pub fn at_least(quantity: &str, measured: f64, bound: f64, anchor: &str) -> Self {
        Self {
            measured: Some(measured),
            tolerance: Some(bound),
            pass: Some(measured >= bound),
            ..Self::base(quantity, Relation::AtLeast, anchor)
        }
    }

    pub fn equals(quantity: &str, predicted: f64, measured: f64, anchor: &str) -> Self {
        Self {
            predicted: Some(predicted),
            measured: Some(measured),
            difference: Some((measured - predicted).abs()),
            pass: Some(measured == predicted),
            ..Self::base(quantity, Relation::Equals, anchor)
        }
    }

    pub fn reported(quantity: &str, predicted: Option<f64>, measured: Option<f64>, anchor: &str) -> Self {
        Self {
            predicted,
            measured,
            ..Self::base(quantity, Relation::Reported, anchor)
        }
    }

    pub fn failed(quantity: &str, predicted: Option<f64>, anchor: &str, note: impl Into<String>) -> Self {
        Self {
            predicted,
            pass: Some(false),
            note: Some(note.into()),
            ..Self::base(quantity, Relation::Within, anchor)
        }
    }

    pub fn with_query(mut self, q: RateQuery) -> Self {
        self.query = Some(q);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn failed_check(&self) -> bool {
        self.pass == Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    /// Appended to the file name as `curve_<name>_<suffix>.csv`.
    pub suffix: Option<String>,
    pub curve: DecayCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub inputs: ExperimentConfig,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Predictions and bounds; failures give exit status 2.
    pub comparisons: Vec<ComparisonRow>,
    /// Hard invariants (proved inequalities, oracle agreement); failures give 3.
    pub invariants: Vec<ComparisonRow>,
    pub fits: Vec<FitResult>,
    #[serde(skip)]
    pub curves: Vec<NamedCurve>,
    #[serde(skip)]
    pub zones: Option<ZoneMap>,
    pub details: serde_json::Value,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(inputs: ExperimentConfig) -> Self {
        Self {
            name: inputs.name.clone(),
            inputs,
            status: Status::Pass,
            error: None,
            comparisons: Vec::new(),
            invariants: Vec::new(),
            fits: Vec::new(),
            curves: Vec::new(),
            zones: None,
            details: serde_json::Value::Null,
            warnings: Vec::new(),
        }
    }

    /// Sets the status from the rows.
    pub fn settle(&mut self) {
        self.status = if self.error.is_some() {
            Status::Error
        } else if self.invariants.iter().any(ComparisonRow::failed_check) {
            Status::InvariantViolation
        } else if self.comparisons.iter().any(ComparisonRow::failed_check) {
            Status::ComparisonFailure
        } else {
            Status::Pass
        };
    }

    fn curve_file(&self, c: &NamedCurve) -> String {
        match &c.suffix {
            Some(s) => format!("curve_{}_{s}.csv", self.name),
            None => format!("curve_{}.csv", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub experiments: Vec<ExperimentReport>,
}

impl ReportBundle {
    pub fn new(experiments: Vec<ExperimentReport>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema_version: super::config::SCHEMA_VERSION,
            experiments,
        }
    }

    pub fn status(&self) -> Status {
        self.experiments.iter().map(|e| e.status).max().unwrap_or(Status::Pass)
    }

    pub fn exit_code(&self) -> i32 {
        self.status().exit_code()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes through a temporary file in `dir` and renames it into place.
fn write_atomic(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    tmp.persist(&path).map_err(|e| io_err(&path, e.error))?;
    Ok(path)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

fn digest(bundle: &ReportBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {} report\n", bundle.tool, bundle.version);
    if bundle.experiments.is_empty() {
        s.push_str("no experiments\n");
        return s;
    }
    let _ = writeln!(s, "overall status: {:?}\n", bundle.status());
    for e in &bundle.experiments {
        let _ = writeln!(s, "## {} ({})\n", e.name, e.inputs.kind.as_str());
        let _ = writeln!(s, "status: {:?}", e.status);
        if let Some(err) = &e.error {
            let _ = writeln!(s, "error: {err}");
        }
        s.push('\n');
        for (title, rows) in [("comparisons", &e.comparisons), ("invariants", &e.invariants)] {
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(s, "{title}:\n");
            s.push_str("| quantity | predicted | measured | difference | tolerance | pass | anchor |\n");
            s.push_str("|---|---|---|---|---|---|---|\n");
            for r in rows {
                let pass = match r.pass {
                    Some(true) => "yes",
                    Some(false) => "NO",
                    None => "-",
                };
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {pass} | {} |",
                    r.quantity,
                    fmt_opt(r.predicted),
                    fmt_opt(r.measured),
                    fmt_opt(r.difference),
                    fmt_opt(r.tolerance),
                    r.anchor
                );
            }
            s.push('\n');
        }
        for w in &e.warnings {
            let _ = writeln!(s, "- warning: {w}");
        }
        if !e.warnings.is_empty() {
            s.push('\n');
        }
    }
    s
}

/// Writes curve and zone CSVs, one summary per experiment and `report.md`.
/// Returns the written paths in a fixed order.
pub fn emit_reports(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut out = Vec::new();
    for e in &bundle.experiments {
        for c in &e.curves {
            out.push(write_atomic(dir, &e.curve_file(c), |w| c.curve.write_csv(w))?);
        }
        if let Some(z) = &e.zones {
            out.push(write_atomic(dir, &format!("zones_{}.csv", e.name), |w| z.write_csv(w))?);
        }
        let summary = serde_json::json!({
            "tool": bundle.tool,
            "version": bundle.version,
            "schema_version": bundle.schema_version,
            "experiment": e,
        });
        out.push(write_atomic(dir, &format!("summary_{}.json", e.name), |w| {
            serde_json::to_writer_pretty(&mut *w, &summary)?;
            writeln!(w)
        })?);
    }
    let text = digest(bundle);
    out.push(write_atomic(dir, "report.md", |w| w.write_all(text.as_bytes()))?);
    Ok(out)
}
