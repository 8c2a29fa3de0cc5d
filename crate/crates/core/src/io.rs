//! Dataset CSV ingestion and structured text outputs.
//!
//! Dataset format: one observation per row, header `subject_id,t,y`, UTF-8,
//! `.` decimal separator. Subjects keep their first-appearance order.

use std::fmt::Display;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sim::GroundTruth;
use crate::types::{EvalGrid, SnippetDataset, Subject};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub data_rows: usize,
    pub subjects_read: usize,
    pub subjects_dropped_min_m: usize,
}

/// Parses a dataset CSV, dropping subjects with fewer than `min_m`
/// observations (`min_m = 0` keeps everyone).
pub fn parse_dataset_csv<F: Real>(
    text: &str,
    domain_lo: F,
    domain_hi: F,
    min_m: usize,
) -> Result<(SnippetDataset<F>, IngestReport)> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, line)) => {
                if !line.trim().is_empty() {
                    break (idx, line);
                }
            }
            None => {
                return Err(Error::ParseError {
                    line: 1,
                    msg: "empty file".into(),
                })
            }
        }
    };
    let cols: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if cols != ["subject_id", "t", "y"] {
        return Err(Error::ParseError {
            line: header.0 + 1,
            msg: format!("expected header `subject_id,t,y`, got `{}`", header.1.trim()),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut times: Vec<Vec<F>> = Vec::new();
    let mut values: Vec<Vec<F>> = Vec::new();
    let mut data_rows = 0usize;

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::ParseError {
                line: line_no,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let t: f64 = fields[1].parse().map_err(|_| Error::ParseError {
            line: line_no,
            msg: format!("invalid time `{}`", fields[1]),
        })?;
        let y: f64 = fields[2].parse().map_err(|_| Error::ParseError {
            line: line_no,
            msg: format!("invalid value `{}`", fields[2]),
        })?;
        let id = fields[0].to_string();
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            times.push(Vec::new());
            values.push(Vec::new());
            order.len() - 1
        });
        times[slot].push(F::cast(t));
        values[slot].push(F::cast(y));
        data_rows += 1;
    }

    let subjects_read = order.len();
    let mut subjects = Vec::new();
    let mut dropped = 0usize;
    for ((id, ts), vs) in order.into_iter().zip(times).zip(values) {
        if ts.len() < min_m {
            dropped += 1;
            continue;
        }
        subjects.push(Subject::new(id, ts, vs));
    }
    let ds = SnippetDataset::new(domain_lo, domain_hi, subjects)?;
    Ok((
        ds,
        IngestReport {
            data_rows,
            subjects_read,
            subjects_dropped_min_m: dropped,
        },
    ))
}

/// Reads and validates a dataset CSV file.
pub fn read_dataset_csv<F: Real>(
    path: &Path,
    domain_lo: F,
    domain_hi: F,
    min_m: usize,
) -> Result<(SnippetDataset<F>, IngestReport)> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset_csv(&text, domain_lo, domain_hi, min_m)
}

pub fn dataset_to_csv<F: Real>(ds: &SnippetDataset<F>) -> String {
    let mut out = String::from("subject_id,t,y\n");
    for s in ds.subjects() {
        for (t, y) in s.times.iter().zip(&s.values) {
            let _ = writeln!(out, "{},{},{}", s.id, t, y);
        }
    }
    out
}

/// `t,<name>` two-column CSV of a curve on a grid.
pub fn curve_to_csv<F: Real>(name: &str, grid: &EvalGrid<F>, values: &[F]) -> String {
    let mut out = format!("t,{name}\n");
    for (t, v) in grid.points().iter().zip(values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

/// Symmetric matrix CSV with the grid abscissae as header row and leading
/// column.
pub fn matrix_to_csv<F: Real>(grid: &EvalGrid<F>, matrix: &[Vec<F>]) -> String {
    let mut out = String::from("t");
    for t in grid.points() {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (t, row) in grid.points().iter().zip(matrix) {
        let _ = write!(out, "{t}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Wide ground-truth grid: `t, mean, var_x` followed by the covariance row
/// `C(t, g_j)` for every grid point.
pub fn truth_grid_to_csv<F: Real>(grid: &EvalGrid<F>, truth: &GroundTruth<F>) -> String {
    let mut out = String::from("t,mean,var_x");
    for t in grid.points() {
        let _ = write!(out, ",c_{t}");
    }
    out.push('\n');
    for &s in grid.points() {
        let _ = write!(out, "{s},{},{}", truth.mean_at(s), truth.var_at(s));
        for &t in grid.points() {
            let _ = write!(out, ",{}", truth.cov_at(s, t));
        }
        out.push('\n');
    }
    out
}

/// Nested key-value run summary.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Summary {
    pub fn new() -> Self {
        Summary::default()
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        self.sections.push((name.to_string(), Vec::new()));
        self
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        if self.sections.is_empty() {
            self.sections.push(("run".to_string(), Vec::new()));
        }
        self.sections
            .last_mut()
            .unwrap()
            .1
            .push((key.to_string(), value.to_string()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            let _ = writeln!(out, "{name}:");
            for (k, v) in entries {
                let _ = writeln!(out, "  {k} = {v}");
            }
        }
        out
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}
