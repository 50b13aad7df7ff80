//! Plain-text matrices: a `rows cols` header, then one whitespace-separated
//! row of reals per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use softalign::DenseMatrix;

use crate::CliError;

pub fn parse(text: &str) -> Result<DenseMatrix, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Parse("missing `rows cols` header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Parse(format!("bad header `{header}`, expected `rows cols`")))?;
    let [rows, cols] = dims[..] else {
        return Err(CliError::Parse(format!(
            "bad header `{header}`, expected `rows cols`"
        )));
    };

    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        seen += 1;
        if seen > rows {
            return Err(CliError::Parse(format!(
                "line {}: more than {rows} data rows",
                lineno + 1
            )));
        }
        let before = values.len();
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| {
                CliError::Parse(format!("line {}: `{token}` is not a number", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse(format!(
                    "line {}: non-finite value `{token}`",
                    lineno + 1
                )));
            }
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(CliError::Parse(format!(
                "line {}: expected {cols} values, found {}",
                lineno + 1,
                values.len() - before
            )));
        }
    }
    if seen != rows {
        return Err(CliError::Parse(format!(
            "expected {rows} data rows, found {seen}"
        )));
    }
    DenseMatrix::new(rows, cols, values).map_err(|e| CliError::Parse(e.to_string()))
}

/// Shortest decimal that reads back to the same `f64`, so files round-trip
/// exactly.
pub fn format(matrix: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", matrix.rows(), matrix.cols());
    for row in matrix.iter_rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn read(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write(path: &Path, matrix: &DenseMatrix) -> Result<(), CliError> {
    fs::write(path, format(matrix)).map_err(|e| CliError::io(path, e))
}
