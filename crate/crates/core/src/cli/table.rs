use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::trace::parse_f64;

/// Numeric columns with `#` comment lines and a `# columns:` header.
///
/// ```text
/// # fitted eta = 0.653
/// # columns: power_w volts fit_v
/// 1e-4 1.2e-1 1.2e-1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

const COLUMNS: &str = "columns:";

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { comments: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn comment(&mut self, text: impl Into<String>) -> &mut Self {
        self.comments.push(text.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "# {COLUMNS} {}", self.columns.join(" "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Table> {
        let mut comments = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(text) = line.strip_prefix('#') {
                let text = text.strip_prefix(' ').unwrap_or(text);
                match text.strip_prefix(COLUMNS) {
                    Some(names) => columns = Some(names.split_whitespace().map(String::from).collect()),
                    None => comments.push(text.to_string()),
                }
                continue;
            }
            let width = columns.as_ref().ok_or_else(|| Error::parse(lineno, "data before '# columns:' header"))?.len();
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| parse_f64(s, lineno))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != width {
                return Err(Error::parse(lineno, format!("expected {width} columns, got {}", row.len())));
            }
            rows.push(row);
        }
        let columns = columns.ok_or_else(|| Error::parse(1, "missing '# columns:' header"))?;
        Ok(Table { comments, columns, rows })
    }
}
