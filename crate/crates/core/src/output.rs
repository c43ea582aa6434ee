//! Tabular results: CSV with a single header row for the data, plus a
//! sidecar `<name>.meta.json` holding everything needed to reproduce the run
//! (resolved config, seed, scheme, code version). The timestamp lives only
//! in the sidecar so repeated runs produce byte-identical CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trajectory::GAUSSIAN_METHOD;

/// One table entry. Floats print with Rust's shortest round-trip formatting,
/// so equal values always serialize to equal bytes.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn to_field(&self) -> String {
        match self {
            Cell::Float(v) => {
                if v.is_finite() {
                    format!("{v}")
                } else {
                    // non-finite values indicate a solver bug and may not
                    // hide inside a numeric column
                    String::new()
                }
            }
            Cell::Int(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => format!("{b}"),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_field())
    }
}

/// Reproducibility metadata written to the sidecar JSON.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub solver: String,
    /// Full resolved flat config (defaults merged with file and overrides);
    /// feeding these back as --set pairs reproduces the run bit-identically.
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub scheme: String,
    pub gaussian_method: String,
    pub code_version: String,
    pub timestamp_unix: u64,
    pub timestamp_utc: String,
}

impl RunMetadata {
    pub fn new(
        scenario: &str,
        solver: &str,
        seed: u64,
        scheme: &str,
        config: BTreeMap<String, String>,
    ) -> Self {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            scenario: scenario.to_string(),
            solver: solver.to_string(),
            config,
            seed,
            scheme: scheme.to_string(),
            gaussian_method: GAUSSIAN_METHOD.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: now,
            timestamp_utc: utc_string(now),
        }
    }
}

/// Column-schema'd result rows plus run metadata.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: RunMetadata,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: Vec<S>, metadata: RunMetadata) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata,
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width != column count");
        self.rows.push(row);
    }

    /// The CSV payload (header plus rows), deterministic for equal content.
    pub fn csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_field))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    /// Writes `<path>` (CSV) and `<stem>.meta.json` next to it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, self.csv_string()?)?;
        let sidecar = path.with_extension("meta.json");
        let mut json = serde_json::to_string_pretty(&self.metadata)?;
        json.push('\n');
        std::fs::write(&sidecar, json)?;
        Ok(sidecar)
    }
}

/// RFC 3339 UTC timestamp from Unix seconds (proleptic Gregorian).
pub fn utc_string(unix_secs: u64) -> String {
    let days = unix_secs / 86_400;
    let secs = unix_secs % 86_400;
    // civil-from-days
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if m <= 2 { y + 1 } else { y };
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        y,
        m,
        d,
        secs / 3600,
        (secs / 60) % 60,
        secs % 60
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMetadata {
        let mut cfg = BTreeMap::new();
        cfg.insert("scenario".into(), "pulse".into());
        RunMetadata::new("pulse", "moments", 7, "euler_maruyama", cfg)
    }

    #[test]
    fn csv_layout_and_determinism() {
        let mut t = ResultTable::new(vec!["t_s", "n_pho", "note"], meta());
        t.push_row(vec![Cell::Float(1e-9), Cell::Float(793.276), Cell::Empty]);
        t.push_row(vec![
            Cell::Float(2e-9),
            Cell::Float(f64::NAN),
            Cell::Text("diverged, see log".into()),
        ]);
        let s = t.csv_string().unwrap();
        assert_eq!(
            s,
            "t_s,n_pho,note\n0.000000001,793.276,\n0.000000002,,\"diverged, see log\"\n"
        );
        assert_eq!(s, t.csv_string().unwrap());
    }

    #[test]
    fn write_emits_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let mut t = ResultTable::new(vec!["a"], meta());
        t.push_row(vec![Cell::Int(3)]);
        let sidecar = t.write(&path).unwrap();
        assert_eq!(sidecar, dir.path().join("out.meta.json"));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a\n3\n");
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
        assert_eq!(json["scenario"], "pulse");
        assert_eq!(json["seed"], 7);
        assert_eq!(json["gaussian_method"], "box_muller");
        assert_eq!(json["config"]["scenario"], "pulse");
        assert!(json["timestamp_utc"].as_str().unwrap().ends_with('Z'));
    }

    #[test]
    fn utc_reference_points() {
        assert_eq!(utc_string(0), "1970-01-01T00:00:00Z");
        assert_eq!(utc_string(86_399), "1970-01-01T23:59:59Z");
        assert_eq!(utc_string(951_782_400), "2000-02-29T00:00:00Z");
        assert_eq!(utc_string(1_700_000_000), "2023-11-14T22:13:20Z");
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn row_width_is_enforced() {
        let mut t = ResultTable::new(vec!["a", "b"], meta());
        t.push_row(vec![Cell::Empty]);
    }
}
