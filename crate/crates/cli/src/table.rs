//! Numeric CSV tables. The first line documents the columns:
//!
//! ```text
//! # schema: t=time; energy=total energy
//! t,energy
//! 0,1.25
//! ```
//!
//! Values use the shortest representation that parses back to the same f64.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns.iter().map(|(n, d)| (n.to_string(), d.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c.0 == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let schema: Vec<String> = self.columns.iter().map(|(n, d)| format!("{n}={d}")).collect();
        let mut s = format!("# schema: {}\n", schema.join("; "));
        let names: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        s.push_str(&names.join(","));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        let schema = lines
            .next()
            .and_then(|l| l.strip_prefix("# schema: "))
            .ok_or_else(|| CliError::config("missing schema line"))?;
        let docs: Vec<(String, String)> = schema
            .split("; ")
            .map(|c| {
                let (n, d) = c.split_once('=').unwrap_or((c, ""));
                (n.to_string(), d.to_string())
            })
            .collect();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| CliError::config("missing header line"))?
            .split(',')
            .collect();
        if header.len() != docs.len() || header.iter().zip(&docs).any(|(h, d)| *h != d.0) {
            return Err(CliError::config("header does not match schema"));
        }
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row = l
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::config(format!("row {}: not numeric", i + 1)))?;
            if row.len() != docs.len() {
                return Err(CliError::config(format!("row {}: wrong width", i + 1)));
            }
            rows.push(row);
        }
        Ok(Self { columns: docs, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trips_bit_exactly(rows in proptest::collection::vec(
            proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 3),
            0..20,
        )) {
            let mut t = Table::new(&[("t", "time"), ("e", "energy"), ("p", "momentum")]);
            for r in rows {
                t.push(r);
            }
            let back = Table::parse(&t.to_csv()).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn rejects_missing_schema() {
        assert!(Table::parse("t\n1\n").is_err());
        assert!(Table::parse("# schema: t=time\nx\n1\n").is_err());
    }
}
