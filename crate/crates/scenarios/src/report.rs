//! Scenario reports: named checks, numeric tables, JSON, CSV and SVG output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Line plot of every column against the first. `None` with fewer than
    /// two rows.
    pub fn to_svg(&self) -> Option<String> {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 48.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        if self.rows.len() < 2 || self.header.len() < 2 {
            return None;
        }
        let finite = |v: &f64| v.is_finite();
        let span = |vals: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) =
                vals.filter(finite).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if lo < hi {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        let (x0, x1) = span(&mut self.rows.iter().map(|r| r[0]));
        let (y0, y1) = span(&mut self.rows.iter().flat_map(|r| r[1..].iter().copied()));
        if !(x0.is_finite() && y0.is_finite()) {
            return None;
        }
        let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
             <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n\
             <text x=\"{PAD}\" y=\"20\" font-size=\"14\">{}</text>\n\
             <text x=\"{PAD}\" y=\"{}\">{x0:.4}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{x1:.4}</text>\n\
             <text x=\"4\" y=\"{}\">{y0:.4}</text><text x=\"4\" y=\"{}\">{y1:.4}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            W - 2.0 * PAD,
            H - 2.0 * PAD,
            self.name,
            H - PAD + 16.0,
            W - PAD,
            H - PAD + 16.0,
            H - PAD,
            PAD + 4.0,
            W / 2.0,
            H - 8.0,
            self.header[0],
        );
        for (k, label) in self.header.iter().enumerate().skip(1) {
            let color = COLORS[(k - 1) % COLORS.len()];
            let points: Vec<String> = self
                .rows
                .iter()
                .filter(|r| r[0].is_finite() && r[k].is_finite())
                .map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[k])))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
                 <text x=\"{}\" y=\"{}\" fill=\"{color}\" text-anchor=\"end\">{label}</text>\n",
                points.join(" "),
                W - PAD - 4.0,
                PAD + 14.0 * k as f64,
            ));
        }
        svg.push_str("</svg>\n");
        Some(svg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self { scenario: scenario.into(), checks: Vec::new(), tables: Vec::new(), notes: Vec::new() }
    }

    /// Records `measured <= tolerance`. NaN fails.
    pub fn at_most(&mut self, name: impl Into<String>, measured: f64, tolerance: f64) -> bool {
        self.push_check(name.into(), Relation::AtMost, measured, tolerance, measured <= tolerance)
    }

    /// Records `measured >= tolerance`. NaN fails.
    pub fn at_least(&mut self, name: impl Into<String>, measured: f64, tolerance: f64) -> bool {
        self.push_check(name.into(), Relation::AtLeast, measured, tolerance, measured >= tolerance)
    }

    /// Records `|measured − target| <= tolerance` under the name
    /// `name` with the deviation as the measured value.
    pub fn near(&mut self, name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> bool {
        self.at_most(name, (measured - target).abs(), tolerance)
    }

    /// A boolean outcome as a `measured >= 1` check.
    pub fn holds(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    fn push_check(&mut self, name: String, relation: Relation, measured: f64, tolerance: f64, pass: bool) -> bool {
        // `+ 0.0` turns an empty-sum `-0.0` into `0.0`.
        self.checks.push(Check { name, relation, tolerance, measured: measured + 0.0, pass });
        pass
    }

    /// Appends the checks and tables of `other` under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}.{}", c.name);
            self.checks.push(c);
        }
        for mut t in other.tables {
            t.name = format!("{prefix}_{}", t.name);
            self.tables.push(t);
        }
        self.notes.extend(other.notes.into_iter().map(|n| format!("{prefix}: {n}")));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json`, `checks.csv` and, per table, a CSV and (with at
    /// least two rows) an SVG plot into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        fs::write(&json, self.to_json()?)?;
        written.push(json);

        let path = dir.join("checks.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["name", "relation", "tolerance", "measured", "pass"])?;
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            w.write_record([&c.name, rel, &c.tolerance.to_string(), &c.measured.to_string(), &c.pass.to_string()])?;
        }
        w.flush()?;
        written.push(path);

        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&t.header)?;
            for row in &t.rows {
                w.write_record(row.iter().map(f64::to_string))?;
            }
            w.flush()?;
            written.push(path);
            if let Some(svg) = t.to_svg() {
                let path = dir.join(format!("{}.svg", t.name));
                fs::write(&path, svg)?;
                written.push(path);
            }
        }
        Ok(written)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("scenario {}: {}\n", self.scenario, if self.pass() { "PASS" } else { "FAIL" });
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            out.push_str(&format!(
                "  [{}] {}: {:.6e} {} {:.6e}\n",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                rel,
                c.tolerance
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_and_nan() {
        let mut r = Report::new("t");
        assert!(r.at_most("a", 0.1, 0.2));
        assert!(r.near("b", 2.01, 2.0, 0.05));
        assert!(r.pass());
        assert!(!r.at_least("c", f64::NAN, 0.0));
        assert!(!r.pass());
        assert_eq!(r.failures().count(), 1);
        assert!(!Report::new("empty").pass());
    }

    #[test]
    fn writes_json_and_csv() {
        let dir = std::env::temp_dir().join(format!("ymlab-report-{}", std::process::id()));
        let mut r = Report::new("t");
        r.at_most("a", 0.1, 0.2);
        let mut t = Table::new("rows", &["j", "v"]);
        t.push(vec![1.0, 2.5]);
        r.tables.push(t);
        let files = r.write(&dir).unwrap();
        assert_eq!(files.len(), 3);
        let csv = std::fs::read_to_string(dir.join("rows.csv")).unwrap();
        assert_eq!(csv, "j,v\n1,2.5\n");
        let back: Report = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(back, r);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let mut t = Table::new("curve", &["x", "a", "b"]);
        assert!(t.to_svg().is_none());
        t.push(vec![0.0, 1.0, f64::NAN]);
        t.push(vec![1.0, 2.0, 3.0]);
        t.push(vec![2.0, 0.5, 4.0]);
        let svg = t.to_svg().unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("NaN"));
    }
}
