use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, Params};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    /// Floats carry 17 significant digits.
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(n) => n.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::I(n as i64)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::I(n)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write_csv(&self, w: impl io::Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |measured − reference| ≤ tolerance.
    Abs,
    /// |measured − reference| ≤ tolerance·|reference|.
    Rel,
    /// measured ≤ reference + tolerance.
    AtMost,
    /// measured ≥ reference − tolerance.
    AtLeast,
    /// measured == reference, bit for bit.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        comparison: Comparison,
        measured: f64,
        reference: f64,
        tolerance: f64,
    ) -> Self {
        let pass = match comparison {
            Comparison::Abs => (measured - reference).abs() <= tolerance,
            Comparison::Rel => (measured - reference).abs() <= tolerance * reference.abs(),
            Comparison::AtMost => measured <= reference + tolerance,
            Comparison::AtLeast => measured >= reference - tolerance,
            Comparison::Exact => measured == reference,
        };
        Check {
            name: name.into(),
            measured,
            reference,
            tolerance,
            comparison,
            pass,
        }
    }

    pub fn abs(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        Check::new(name, Comparison::Abs, measured, reference, tolerance)
    }

    /// A largest error that must stay within `tolerance` of zero.
    pub fn max_error(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Check::new(name, Comparison::AtMost, error, 0.0, tolerance)
    }

    pub fn exact(name: impl Into<String>, measured: f64, reference: f64) -> Self {
        Check::new(name, Comparison::Exact, measured, reference, 0.0)
    }

    pub fn count_zero(name: impl Into<String>, count: usize) -> Self {
        Check::exact(name, count as f64, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub experiment: String,
    pub seed: u64,
    pub params: Params,
}

/// The output of an experiment before it is written out. The wall time is
/// printed but kept out of the files so they depend only on config and seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub rows: usize,
    pub csv: String,
    /// Closed-form values the measured columns are compared with.
    pub reference: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip)]
    pub table: Table,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub fn new(
        config: &ExperimentConfig,
        table: Table,
        reference: BTreeMap<String, Value>,
        checks: Vec<Check>,
    ) -> Self {
        let name = config.experiment.name();
        RunReport {
            config: ConfigEcho {
                experiment: name.to_string(),
                seed: config.seed,
                params: config.params.clone(),
            },
            rows: table.rows.len(),
            csv: format!("{name}.csv"),
            reference,
            passed: checks.iter().all(|c| c.pass),
            checks,
            table,
            wall_time: Duration::ZERO,
        }
    }

    pub fn report_name(&self) -> String {
        format!("{}.report.json", self.config.experiment)
    }

    /// Writes `<name>.csv` and `<name>.report.json`; returns their paths.
    pub fn write(&self, dir: &Path) -> io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(&self.csv);
        let mut buf = Vec::new();
        self.table.write_csv(&mut buf).map_err(io::Error::other)?;
        std::fs::write(&csv_path, buf)?;
        let json_path = dir.join(self.report_name());
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(&json_path, text)?;
        Ok((csv_path, json_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_seventeen_digits() {
        let mut t = Table::new(&["x", "ok", "n"]);
        t.push(vec![0.1.into(), true.into(), 3usize.into()]);
        t.push(vec![(-1.0 / 3.0).into(), false.into(), 0usize.into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "x,ok,n\n1.0000000000000001e-1,true,3\n-3.3333333333333331e-1,false,0\n"
        );
        for line in s.lines().skip(1) {
            let x: f64 = line.split(',').next().unwrap().parse().unwrap();
            assert!(x == 0.1 || x == -1.0 / 3.0);
        }
    }

    #[test]
    fn comparisons() {
        assert!(Check::abs("a", 1.0, 1.0 + 1e-13, 1e-12).pass);
        assert!(!Check::abs("a", 1.0, 1.1, 1e-12).pass);
        assert!(Check::new("r", Comparison::Rel, 100.0, 100.00001, 1e-6).pass);
        assert!(!Check::new("r", Comparison::Rel, 100.0, 100.001, 1e-6).pass);
        assert!(Check::new("m", Comparison::AtLeast, 0.5, 0.5, 0.0).pass);
        assert!(!Check::exact("e", 0.30000000000000004, 0.3).pass);
        assert!(!Check::max_error("nan", f64::NAN, 1.0).pass);
    }
}
