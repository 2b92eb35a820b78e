//! Rendering of command results as JSON, CSV or an aligned text table.

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;

/// Flat tabular view of a result, used for CSV and table output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Table {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|s| s.to_string()).collect());
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_text(&self) -> String {
        let cols = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate().take(cols) {
                widths[k] = widths[k].max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> =
                cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.headers);
        out += &(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  ") + "\n");
        for row in &self.rows {
            out += &line(row);
        }
        out
    }
}

/// Result of one subcommand.
#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub json: Value,
    pub table: Table,
    /// Every executed check passed.
    pub passed: bool,
}

impl CommandOutput {
    pub fn new(json: &impl Serialize, table: Table, passed: bool) -> Result<CommandOutput> {
        Ok(CommandOutput { json: serde_json::to_value(json)?, table, passed })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json)? + "\n"),
            Format::Csv => self.table.to_csv(),
            Format::Table => Ok(self.table.to_text()),
        }
    }
}

/// Shortest round-trip decimal form of a float.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Complex number as `re+imi`.
pub fn cnum(re: f64, im: f64) -> String {
    if im == 0.0 {
        num(re)
    } else if re == 0.0 {
        format!("{}i", num(im))
    } else if im < 0.0 {
        format!("{}-{}i", num(re), num(-im))
    } else {
        format!("{}+{}i", num(re), num(im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut t = Table::new(["causet", "h"]);
        t.push(["3;0<1,0<2", "2"]);
        assert_eq!(t.to_csv().unwrap(), "causet,h\r\n\"3;0<1,0<2\",2\r\n");
    }

    #[test]
    fn text_table_aligns_columns() {
        let mut t = Table::new(["n", "value"]);
        t.push(["10", "x"]);
        assert_eq!(t.to_text(), "n   value\n--  -----\n10  x\n");
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(cnum(0.5, -0.25), "0.5-0.25i");
        assert_eq!(cnum(-0.0, 0.0), "0");
        assert_eq!(cnum(0.0, 1.0), "1i");
    }
}
