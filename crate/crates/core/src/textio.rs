//! Shared helpers for the delimited-text artifacts.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Shortest decimal representation that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Render a matrix as comma-separated rows.
pub(crate) fn matrix_to_csv<T, F>(rows: &[Vec<T>], fmt: F) -> String
where
    F: Fn(&T) -> String,
{
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(&fmt).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parse comma-separated rows of numbers. Every row must have `cols` entries.
pub(crate) fn parse_matrix<T: std::str::FromStr>(text: &str, cols: usize) -> Result<Vec<Vec<T>>> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<T>().map_err(|_| {
                    Error::Parse(format!("line {}: bad value `{}`", line_no + 1, f.trim()))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "line {}: expected {cols} columns, found {}",
                line_no + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
