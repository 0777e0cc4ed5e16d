//! Where and how reports are written.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use fogduty_core::sim::{Comparison, SimReport};
use fogduty_core::tables::{compare, golden, CellDeviation, Precision, Table, TableError, TableId};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// What was asked for, written next to the reports so a run can be repeated.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// `null` for the bundled reference config.
    pub config: Option<String>,
    pub tables: Vec<String>,
    pub format: Format,
    pub full_precision: bool,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        config: Option<&Path>,
        tables: &[TableId],
        format: Format,
        precision: Precision,
    ) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config: config.map(|p| p.display().to_string()),
            tables: tables.iter().map(|t| t.name()).collect(),
            format,
            full_precision: precision == Precision::Full,
        }
    }
}

pub struct Output {
    dir: Option<PathBuf>,
    format: Format,
    precision: Precision,
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

impl Output {
    pub fn new(dir: Option<PathBuf>, format: Format, precision: Precision) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Self { dir, format, precision })
    }

    fn write_file(&self, dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    fn stdout(contents: &str) -> Result<()> {
        io::stdout().lock().write_all(contents.as_bytes()).context("cannot write to stdout")
    }

    fn table_text(&self, table: &Table) -> String {
        match self.format {
            Format::Csv => table.to_csv(self.precision),
            Format::Json => pretty(&table.to_json(self.precision)),
        }
    }

    pub fn tables(&self, tables: &[Table]) -> Result<()> {
        if let Some(dir) = &self.dir {
            for t in tables {
                let name = format!("{}.{}", t.id.name(), self.format.extension());
                self.write_file(dir, &name, self.table_text(t).as_bytes())?;
            }
            return Ok(());
        }
        match (self.format, tables) {
            (_, [one]) => Self::stdout(&self.table_text(one)),
            (Format::Csv, _) => {
                let blocks: Vec<String> = tables
                    .iter()
                    .map(|t| format!("# {}: {}\n{}", t.id.name(), t.id.title(), t.to_csv(self.precision)))
                    .collect();
                Self::stdout(&blocks.join("\n"))
            }
            (Format::Json, _) => {
                let all: Vec<_> = tables.iter().map(|t| t.to_json(self.precision)).collect();
                Self::stdout(&pretty(&all))
            }
        }
    }

    /// Diffs each table against the published one. Returns whether every cell
    /// was within tolerance or a documented misprint.
    pub fn deviations(&self, tables: &[Table]) -> Result<bool> {
        let mut cells: Vec<CellDeviation> = Vec::new();
        let mut summary = String::from("table    cells  failed  known  max_rel_err  status\n");
        let mut clean = true;
        for t in tables {
            let diff = match compare(t, &golden(t.id)?) {
                Ok(d) => d,
                Err(TableError::Shape { expected, actual, .. }) => {
                    clean = false;
                    summary.push_str(&format!(
                        "{:<8} not comparable: {actual} rows against {expected} published\n",
                        t.id.name()
                    ));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let failed = diff.failures().count();
            let known = diff.cells.iter().filter(|c| !c.pass && c.known_issue.is_some()).count();
            clean &= diff.passed();
            summary.push_str(&format!(
                "{:<8} {:>5}  {:>6}  {:>5}  {:>11.3e}  {}\n",
                t.id.name(),
                diff.cells.len(),
                failed,
                known,
                diff.max_rel_error(),
                if diff.passed() { "ok" } else { "FAIL" }
            ));
            cells.extend(diff.cells);
        }

        match &self.dir {
            Some(dir) => {
                let name = format!("deviations.{}", self.format.extension());
                let body = match self.format {
                    Format::Json => pretty(&cells),
                    Format::Csv => deviations_csv(&cells)?,
                };
                self.write_file(dir, &name, body.as_bytes())?;
                Self::stdout(&summary)?;
            }
            None => {
                eprint!("{summary}");
                for c in cells.iter().filter(|c| !c.pass) {
                    eprintln!(
                        "{} row {} ({}) {}: published {}, computed {}{}",
                        c.table,
                        c.row,
                        c.row_label,
                        c.column,
                        c.expected,
                        c.actual,
                        c.known_issue.as_deref().map(|k| format!(" [known: {k}]")).unwrap_or_default()
                    );
                }
            }
        }
        Ok(clean)
    }

    pub fn simulation(&self, report: &SimReport) -> Result<()> {
        match (self.format, &self.dir) {
            (Format::Json, Some(dir)) => self.write_file(dir, "simulation.json", pretty(report).as_bytes()),
            (Format::Json, None) => Self::stdout(&pretty(report)),
            (Format::Csv, Some(dir)) => {
                let mut summary = Vec::new();
                report.write_summary_csv(&mut summary)?;
                self.write_file(dir, "simulation_summary.csv", &summary)?;
                let mut devices = Vec::new();
                report.write_devices_csv(&mut devices)?;
                self.write_file(dir, "simulation_devices.csv", &devices)
            }
            (Format::Csv, None) => {
                let mut summary = Vec::new();
                report.write_summary_csv(&mut summary)?;
                Self::stdout(&String::from_utf8(summary).expect("csv is utf-8"))
            }
        }
    }

    pub fn comparison(&self, comparison: &Comparison) -> Result<()> {
        let body = match self.format {
            Format::Json => pretty(comparison),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record([
                    "metric",
                    "simulated",
                    "analytic",
                    "relative",
                    "tolerance",
                    "enforced",
                    "within_tolerance",
                ])?;
                for d in &comparison.deviations {
                    w.write_record([
                        d.metric.clone(),
                        d.simulated.to_string(),
                        d.analytic.to_string(),
                        d.relative.to_string(),
                        d.tolerance.to_string(),
                        d.enforced.to_string(),
                        d.within_tolerance.to_string(),
                    ])?;
                }
                String::from_utf8(w.into_inner()?).expect("csv is utf-8")
            }
        };
        match &self.dir {
            Some(dir) => self.write_file(dir, &format!("comparison.{}", self.format.extension()), body.as_bytes()),
            None => {
                eprint!("{body}");
                Ok(())
            }
        }
    }

    pub fn manifest(&self, manifest: &RunManifest) -> Result<()> {
        match &self.dir {
            Some(dir) => self.write_file(dir, "manifest.json", pretty(manifest).as_bytes()),
            None => Ok(()),
        }
    }
}

fn deviations_csv(cells: &[CellDeviation]) -> Result<String> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "table",
        "row",
        "row_label",
        "column",
        "expected",
        "actual",
        "abs_error",
        "rel_error",
        "pass",
        "known_issue",
    ])?;
    for c in cells {
        w.write_record([
            c.table.name(),
            c.row.to_string(),
            c.row_label.clone(),
            c.column.clone(),
            c.expected.clone(),
            c.actual.clone(),
            opt(c.abs_error),
            opt(c.rel_error),
            c.pass.to_string(),
            c.known_issue.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?).expect("csv is utf-8"))
}
