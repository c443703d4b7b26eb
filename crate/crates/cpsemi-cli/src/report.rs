use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Non-finite residuals serialize as null.
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let c = self.header.iter().position(|h| h == name).expect("known column");
        self.rows.iter().map(|r| r[c]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// Everything here is a pure function of (model file, flags); wall time goes to `timing.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub model: String,
    pub kind: String,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
    pub tables: Vec<String>,
    pub data: BTreeMap<String, serde_json::Value>,
    pub error: Option<ErrorInfo>,
    #[serde(skip)]
    pub table_data: Vec<Table>,
}

impl Report {
    pub fn new(command: &str, model: &str, kind: &str, seed: u64) -> Self {
        Report {
            command: command.into(),
            model: model.into(),
            kind: kind.into(),
            seed,
            status: Status::Pass,
            checks: vec![],
            tables: vec![],
            data: BTreeMap::new(),
            error: None,
            table_data: vec![],
        }
    }

    pub fn check(&mut self, name: &str, residual: f64, tolerance: f64) -> bool {
        let passed = residual <= tolerance;
        self.flag(name, passed, residual, tolerance)
    }

    /// A check whose outcome is decided elsewhere; `residual` is informational.
    pub fn flag(&mut self, name: &str, passed: bool, residual: f64, tolerance: f64) -> bool {
        self.checks.push(Check {
            name: name.into(),
            passed,
            residual,
            tolerance,
        });
        if !passed && self.status == Status::Pass {
            self.status = Status::Fail;
        }
        passed
    }

    pub fn data<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("report data serializes");
        self.data.insert(key.into(), v);
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(format!("{}.csv", t.name));
        self.table_data.push(t);
    }

    pub fn fail_with(&mut self, code: &str, message: String) {
        self.status = Status::Error;
        self.error = Some(ErrorInfo { code: code.into(), message });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag} {:<40} residual {:.3e} (tol {:.1e})", c.name, c.residual, c.tolerance);
        }
        for t in &self.table_data {
            let _ = writeln!(out, "table {} ({} rows)", t.name, t.rows.len());
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "ERROR {}: {}", e.code, e.message);
        }
        let _ = writeln!(out, "status: {:?}", self.status);
        out
    }

    pub fn write(&self, dir: &Path, wall_time_s: f64) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        for t in &self.table_data {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        let timing = serde_json::json!({ "command": self.command, "wall_time_s": wall_time_s });
        std::fs::write(dir.join("timing.json"), format!("{timing:#}\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_check_sets_status() {
        let mut r = Report::new("validate", "m.json", "lindblad", 0);
        assert!(r.check("a", 1e-12, 1e-10));
        assert_eq!(r.status, Status::Pass);
        assert!(!r.check("b", f64::NAN, 1e-10));
        assert_eq!(r.status, Status::Fail);
        assert!(r.to_json().contains("\"residual\": null"));
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("rows", &["lambda", "error"]);
        t.push(vec![0.5, 1.25e-3]);
        assert_eq!(t.to_csv(), "lambda,error\n5e-1,1.25e-3\n");
    }
}
