//! Tables and their CSV/JSON encodings.

use std::io::{self, Write};

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => csv_escape(s),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null),
            Cell::Int(v) => (*v).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

pub fn col(name: &str, unit: &str) -> Column {
    Column { name: name.to_string(), unit: unit.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub program: String,
    pub version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Metadata,
}

impl OutputTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Data rows with an error marker.
    pub fn error_rows(&self) -> usize {
        match self.column("error") {
            Some(i) => self.rows.iter().filter(|r| !matches!(r[i], Cell::Empty)).count(),
            None => 0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = &self.metadata;
        writeln!(w, "# {} {}", m.program, m.version)?;
        writeln!(w, "# command: {}", m.config.command.name())?;
        writeln!(w, "# config: {}", serde_json::to_string(&m.config).map_err(io::Error::other)?)?;
        writeln!(w, "# wall_time_s: {}", m.wall_time_s)?;
        let units: Vec<String> = self.columns.iter().map(|c| csv_escape(&c.unit)).collect();
        writeln!(w, "# units: {}", units.join(","))?;
        let names: Vec<String> = self.columns.iter().map(|c| csv_escape(&c.name)).collect();
        writeln!(w, "{}", names.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_json()).map_err(io::Error::other)?;
        writeln!(w)
    }
}
