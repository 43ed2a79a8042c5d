//! Tabular output with the resolved configuration echoed as header comments.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use polaron_core::ensemble::file::fmt_f64;
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // Non-finite values have no JSON number form.
            Cell::Num(x) if !x.is_finite() => Value::String(x.to_string()),
            Cell::Num(x) => Value::from(*x),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, header: &str, format: Format) -> String {
        let mut out = String::new();
        for line in header.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        match format {
            Format::Csv => {
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                    out.push('\n');
                }
            }
            Format::Jsonl => {
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    out.push_str(&Value::Object(obj).to_string());
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Writes to `<dir>/<name>.<ext>` when a directory is given, else to stdout.
    pub fn emit(&self, header: &str, format: Format, dir: Option<&Path>) -> io::Result<()> {
        let text = self.render(header, format);
        match dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(format!("{}.{}", self.name, format.as_str())), text)
            }
            None => io::stdout().lock().write_all(text.as_bytes()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("demo", &["P", "kind"]);
        t.push(vec![0.5.into(), "plateau".into()]);
        t
    }

    #[test]
    fn csv_has_comment_header_then_columns() {
        let text = sample().render("alpha = 1\nh = 0.01", Format::Csv);
        assert_eq!(text, "# alpha = 1\n# h = 0.01\nP,kind\n5.0000000000000000e-1,plateau\n");
    }

    #[test]
    fn jsonl_rows_are_objects() {
        let text = sample().render("", Format::Jsonl);
        let v: Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["P"], 0.5);
        assert_eq!(v["kind"], "plateau");
    }
}
