//! Result rows shared by every experiment, written as CSV or JSON.
//!
//! Columns, in order: `experiment`, `shape`, `parameter`, `value`, `item`,
//! `statistic`, `measured`, `count`, `half_width`. A row reads "with
//! `parameter` = `value`, `statistic` of `item` (an image index, or empty
//! for aggregates) was `measured` over `count` items", with `half_width` the
//! 95% binomial half-width for proportions and 0 otherwise. Floats are written in shortest round-trip form, so both formats
//! convert into each other without loss.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub shape: String,
    pub parameter: String,
    pub value: f64,
    pub item: Option<u64>,
    pub statistic: String,
    pub measured: f64,
    pub count: u64,
    pub half_width: f64,
}

impl ResultRow {
    pub fn new(
        experiment: &str,
        shape: &str,
        (parameter, value): (&str, f64),
        (statistic, measured): (&str, f64),
        count: u64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            shape: shape.to_string(),
            parameter: parameter.to_string(),
            value,
            item: None,
            statistic: statistic.to_string(),
            measured,
            count,
            half_width: 0.0,
        }
    }

    /// A proportion `hits / count` with its normal-approximation 95%
    /// half-width.
    pub fn proportion(
        experiment: &str,
        shape: &str,
        parameter: (&str, f64),
        statistic: &str,
        hits: u64,
        count: u64,
    ) -> Self {
        let p = if count == 0 { 0.0 } else { hits as f64 / count as f64 };
        let mut row = Self::new(experiment, shape, parameter, (statistic, p), count);
        row.half_width = binomial_half_width(p, count);
        row
    }

    pub fn for_item(mut self, item: usize) -> Self {
        self.item = Some(item as u64);
        self
    }
}

pub fn binomial_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn output_error(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: Format, out: W) -> CliResult<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row).map_err(output_error)?;
            }
            w.flush().map_err(output_error)
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(output_error)?;
            out.write_all(b"\n").map_err(output_error)
        }
    }
}

pub fn read_rows(bytes: &[u8], format: Format) -> CliResult<Vec<ResultRow>> {
    match format {
        Format::Csv => csv::Reader::from_reader(bytes)
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(output_error),
        Format::Json => serde_json::from_slice(bytes).map_err(output_error),
    }
}

pub fn save_rows(rows: &[ResultRow], path: &Path) -> CliResult<()> {
    let mut buf = Vec::new();
    write_rows(rows, Format::for_path(path), &mut buf)?;
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}
