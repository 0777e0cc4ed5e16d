//! Named reproduction targets, one per published table, with printed-precision
//! formatting and a per-cell diff against bundled golden values.

mod build;
mod golden;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::energy::EnergyError;
use crate::queueing::QueueError;
use crate::schedule::ScheduleError;

pub use build::{build, build_all};
pub use golden::{compare, golden, CellDeviation, GoldenTable, TableDiff};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("unknown table '{0}', expected table1 ... table11")]
    UnknownTable(String),
    #[error("golden file for {0} is malformed: {1}")]
    Golden(TableId, String),
    #[error("{table} has {actual} rows, the published table has {expected}")]
    Shape { table: TableId, expected: usize, actual: usize },
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

pub type Result<T, E = TableError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "String")]
pub enum TableId {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Table6,
    Table7,
    Table8,
    Table9,
    Table10,
    Table11,
}

impl TableId {
    pub const ALL: [TableId; 11] = [
        Self::Table1,
        Self::Table2,
        Self::Table3,
        Self::Table4,
        Self::Table5,
        Self::Table6,
        Self::Table7,
        Self::Table8,
        Self::Table9,
        Self::Table10,
        Self::Table11,
    ];

    pub fn number(self) -> usize {
        Self::ALL.iter().position(|&t| t == self).expect("listed") + 1
    }

    pub fn name(self) -> String {
        format!("table{}", self.number())
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Table1 => "Module current and response time, regular operation",
            Self::Table2 => "Module current and response time, emergency operation",
            Self::Table3 => "One device in regular mode, kWh per period by sleep time",
            Self::Table4 => "Fleet consumption, kWh per period by sleep time",
            Self::Table5 => "Fleet consumption with part of the time in emergency mode",
            Self::Table6 => "Coordinator arrival rate, delay and load by sleep time",
            Self::Table7 => "Largest sleep time at the Fog coordinator, by feedback share",
            Self::Table8 => "Largest sleep time behind a Mist node, by feedback share",
            Self::Table9 => "Occupancy groups: away and home time",
            Self::Table10 => "Per-group savings with Long Sleep while away",
            Self::Table11 => "Condominium consumption and savings by Long Sleep value",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl From<TableId> for String {
    fn from(id: TableId) -> String {
        id.name()
    }
}

impl FromStr for TableId {
    type Err = TableError;

    /// Accepts `table6`, `Table6` or `6`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let digits = lower.strip_prefix("table").unwrap_or(&lower);
        digits
            .parse::<usize>()
            .ok()
            .and_then(|n| n.checked_sub(1))
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| TableError::UnknownTable(s.to_string()))
    }
}

/// How a column is printed at the published precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    /// Shortest representation that round-trips.
    General,
    Fixed(usize),
    /// Scientific with this many significant digits.
    Sci(usize),
}

/// A cell passes if any of the configured checks does.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tolerance {
    pub relative: Option<f64>,
    pub absolute: Option<f64>,
    /// Within half a unit of the golden value's last printed digit.
    pub printed: bool,
}

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance { relative: Some(1e-9), absolute: None, printed: false };
    pub const PRINTED: Tolerance = Tolerance { relative: None, absolute: None, printed: true };

    pub fn relative(r: f64) -> Self {
        Self { relative: Some(r), ..Self::default() }
    }

    pub fn absolute(a: f64) -> Self {
        Self { absolute: Some(a), ..Self::default() }
    }

    pub fn or_printed(self) -> Self {
        Self { printed: true, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub key: &'static str,
    pub format: Format,
    pub tolerance: Tolerance,
}

impl Column {
    pub fn new(key: &'static str, format: Format, tolerance: Tolerance) -> Self {
        Self { key, format, tolerance }
    }

    pub fn text(key: &'static str) -> Self {
        Self::new(key, Format::Text, Tolerance::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Number(f64),
    /// Printed as `-`.
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Number(f64::from(v))
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// As published.
    #[default]
    Printed,
    /// Every digit `f64` has.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub id: TableId,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

pub const MISSING: &str = "-";

fn format_number(v: f64, format: Format) -> String {
    let s = match format {
        Format::Text | Format::General => format!("{v}"),
        Format::Fixed(d) => format!("{v:.d$}"),
        Format::Sci(sig) => {
            let p = sig.saturating_sub(1);
            format!("{v:.p$e}")
        }
    };
    // "-0.00" reads as a sign error.
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

impl Table {
    pub fn column_index(&self, key: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.key == key)
    }

    pub fn cell(&self, row: usize, key: &str) -> Option<&Cell> {
        self.rows.get(row)?.get(self.column_index(key)?)
    }

    /// Numeric value of a cell, if it has one.
    pub fn value(&self, row: usize, key: &str) -> Option<f64> {
        match self.cell(row, key)? {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn formatted(&self, row: usize, col: usize, precision: Precision) -> String {
        match &self.rows[row][col] {
            Cell::Text(s) => s.clone(),
            Cell::Missing => MISSING.to_string(),
            Cell::Number(v) => match precision {
                Precision::Printed => format_number(*v, self.columns[col].format),
                Precision::Full => format!("{v}"),
            },
        }
    }

    pub fn header(&self) -> Vec<&'static str> {
        self.columns.iter().map(|c| c.key).collect()
    }

    pub fn formatted_rows(&self, precision: Precision) -> Vec<Vec<String>> {
        (0..self.rows.len())
            .map(|r| (0..self.columns.len()).map(|c| self.formatted(r, c, precision)).collect())
            .collect()
    }

    pub fn to_csv(&self, precision: Precision) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for row in self.formatted_rows(precision) {
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Numbers are emitted at the requested precision, missing cells as `null`.
    pub fn to_json(&self, precision: Precision) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = (0..self.rows.len())
            .map(|r| {
                (0..self.columns.len())
                    .map(|c| match &self.rows[r][c] {
                        Cell::Text(s) => serde_json::Value::from(s.as_str()),
                        Cell::Missing => serde_json::Value::Null,
                        Cell::Number(_) => {
                            let s = self.formatted(r, c, precision);
                            s.parse::<f64>().map_or(serde_json::Value::from(s), serde_json::Value::from)
                        }
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "table": self.id.name(),
            "title": self.id.title(),
            "columns": self.header(),
            "rows": rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_parse_and_print() {
        assert_eq!("table6".parse::<TableId>().unwrap(), TableId::Table6);
        assert_eq!("Table11".parse::<TableId>().unwrap(), TableId::Table11);
        assert_eq!("3".parse::<TableId>().unwrap(), TableId::Table3);
        for bad in ["table0", "table12", "tbl3", ""] {
            assert!(matches!(bad.parse::<TableId>(), Err(TableError::UnknownTable(_))), "{bad}");
        }
        assert_eq!(TableId::Table10.to_string(), "table10");
        assert_eq!(TableId::ALL.len(), 11);
    }

    #[test]
    fn number_formats() {
        assert_eq!(format_number(0.352, Format::Fixed(0)), "0");
        assert_eq!(format_number(351.9, Format::Fixed(0)), "352");
        assert_eq!(format_number(1.6312e-5, Format::Sci(3)), "1.63e-5");
        assert_eq!(format_number(-0.0001, Format::Fixed(2)), "0.00");
        assert_eq!(format_number(-1.5, Format::Fixed(1)), "-1.5");
        assert_eq!(format_number(2.81, Format::General), "2.81");
    }
}
