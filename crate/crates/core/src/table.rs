//! CSV result tables with a `#`-prefixed provenance header.

use std::io::Write;

use crate::error::{Error, Result};

pub const BASE_COLUMNS: [&str; 5] = ["scheme", "power_dbm", "mean_rate", "stderr", "n_trials"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scheme: String,
    pub power_dbm: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub n_trials: u64,
    pub extras: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub extra_columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn new(extra_columns: &[&str]) -> Self {
        Self {
            extra_columns: extra_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.extras.len(), self.extra_columns.len());
        self.rows.push(row);
    }

    /// Rows whose scheme label is `scheme`.
    pub fn rows_for<'a>(&'a self, scheme: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn extra(&self, row: &Row, column: &str) -> Option<f64> {
        self.extra_columns
            .iter()
            .position(|c| c == column)
            .map(|i| row.extras[i])
    }
}

/// Round-trippable decimal with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes provenance comments, the header row and every data row.
pub fn write_csv<W: Write>(mut out: W, provenance: &[(String, String)], table: &ResultTable) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write output: {e}"));
    for (k, v) in provenance {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Config(format!("cannot write output: {e}"));
    let header: Vec<&str> = BASE_COLUMNS
        .iter()
        .copied()
        .chain(table.extra_columns.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in &table.rows {
        let mut rec = vec![
            r.scheme.clone(),
            fmt_num(r.power_dbm),
            fmt_num(r.mean_rate),
            fmt_num(r.stderr),
            r.n_trials.to_string(),
        ];
        rec.extend(r.extras.iter().map(|&x| fmt_num(x)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_rows_and_precision() {
        let mut t = ResultTable::new(&["side_m"]);
        t.push(Row {
            scheme: "pinching-1-sim".into(),
            power_dbm: 5.0,
            mean_rate: 0.1 + 0.2,
            stderr: 1e-3,
            n_trials: 10,
            extras: vec![10.0],
        });
        let mut buf = Vec::new();
        write_csv(&mut buf, &[("seed".into(), "1".into())], &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed: 1");
        assert_eq!(lines[1], "scheme,power_dbm,mean_rate,stderr,n_trials,side_m");
        assert!(!text.contains('\r'));
        let field: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(field, 0.1 + 0.2);
        assert_eq!(t.extra(&t.rows[0], "side_m"), Some(10.0));
        assert_eq!(t.rows_for("pinching-1-sim").count(), 1);
    }

    #[test]
    fn formatting_round_trips() {
        for x in [std::f64::consts::PI, 1e-300, -7.25e12, 0.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }
}
