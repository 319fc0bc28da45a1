//! Tables, manifests and the CSV/JSON writers.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Provenance block embedded in every output file.
///
/// Wall time is reported on stderr rather than here, so that reruns with the
/// same parameters produce byte-identical files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub params: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub versions: Map<String, Value>,
    pub tolerance_flags: Vec<String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, params: &impl Serialize) -> Self {
        let params = match serde_json::to_value(params) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        let mut versions = Map::new();
        versions.insert("ffcorr".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("ffcorr-core".into(), ffcorr_core::VERSION.into());
        Self { command: command.into(), params, seed: None, versions, tolerance_flags: vec![], warnings: vec![] }
    }

    pub fn flag(&mut self, name: impl Into<String>) {
        self.tolerance_flags.push(name.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
}

impl Cell {
    fn csv(self) -> String {
        match self {
            // 17 significant digits
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(n) => n.to_string(),
        }
    }

    fn json(self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number),
            Cell::I(n) => n.into(),
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

/// Column-named rows. A scalar result is a table with one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Written as a single flat JSON object instead of a `rows` array.
    pub scalar: bool,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![], scalar: false }
    }

    pub fn record(fields: &[(&str, Cell)]) -> Self {
        let mut t = Self::new(&fields.iter().map(|f| f.0).collect::<Vec<_>>());
        t.rows.push(fields.iter().map(|f| f.1).collect());
        t.scalar = true;
        t
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub struct Report {
    pub table: Table,
    pub manifest: Manifest,
}

impl Report {
    pub fn write<W: Write>(&self, format: Format, out: W) -> anyhow::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.manifest)?)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.table.columns)?;
        for row in &self.table.rows {
            w.write_record(row.iter().map(|c| c.csv()))?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_json<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        let row_obj = |row: &Vec<Cell>| -> Value {
            Value::Object(self.table.columns.iter().cloned().zip(row.iter().map(|c| c.json())).collect())
        };
        let mut top = Map::new();
        if self.table.scalar {
            for row in &self.table.rows {
                if let Value::Object(m) = row_obj(row) {
                    top.extend(m);
                }
            }
        } else {
            top.insert("rows".into(), Value::Array(self.table.rows.iter().map(row_obj).collect()));
        }
        top.insert("manifest".into(), serde_json::to_value(&self.manifest)?);
        serde_json::to_writer_pretty(&mut out, &top)?;
        writeln!(out)?;
        Ok(())
    }
}
