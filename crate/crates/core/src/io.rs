//! JSON file formats for states and channels.
//!
//! A matrix is `{"dim": d, "entries": [[[re, im], ...], ...]}` in row-major
//! order. A channel is `{"in_dim": d, "out_dim": m, "kraus": [entries, ...]}`
//! where every Kraus entry list is `m x d`. Numbers are written with 17
//! significant digits so that a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matrix::{c, ComplexMatrix, DensityMatrix};
use crate::protocols::{validate_sio, SioChannel};

type Entries = Vec<Vec<[f64; 2]>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    dim: usize,
    entries: Entries,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<Entries>,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))
}

fn entries_to_matrix(entries: &Entries, rows: usize, cols: usize, field: &str) -> Result<ComplexMatrix> {
    if entries.len() != rows {
        return Err(Error::Parse(format!("{field}: expected {rows} rows, found {}", entries.len())));
    }
    let mut flat = Vec::with_capacity(rows * cols);
    for (r, row) in entries.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Parse(format!("{field}[{r}]: expected {cols} columns, found {}", row.len())));
        }
        flat.extend(row.iter().map(|&[re, im]| c(re, im)));
    }
    ComplexMatrix::from_row_major(rows, cols, flat)
}

/// Parses a square matrix in the file format.
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let file: MatrixFile = serde_json::from_str(text).map_err(parse_error)?;
    if file.dim == 0 {
        return Err(Error::Parse("dim: must be positive".into()));
    }
    entries_to_matrix(&file.entries, file.dim, file.dim, "entries")
}

/// Parses and validates a density matrix.
pub fn parse_density(text: &str) -> Result<DensityMatrix> {
    DensityMatrix::new(parse_matrix(text)?)
}

/// Parses a channel file and validates it as SIO with tolerance `tol`.
pub fn parse_channel(text: &str, tol: f64) -> Result<SioChannel> {
    validate_sio(parse_kraus(text)?, tol)
}

/// Parses a channel file into its raw Kraus operators.
pub fn parse_kraus(text: &str) -> Result<Vec<ComplexMatrix>> {
    let file: ChannelFile = serde_json::from_str(text).map_err(parse_error)?;
    if file.in_dim == 0 || file.out_dim == 0 {
        return Err(Error::Parse("in_dim and out_dim must be positive".into()));
    }
    if file.kraus.is_empty() {
        return Err(Error::Parse("kraus: empty list".into()));
    }
    file.kraus
        .iter()
        .enumerate()
        .map(|(k, e)| entries_to_matrix(e, file.out_dim, file.in_dim, &format!("kraus[{k}]")))
        .collect()
}

fn number(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("write to string");
}

fn write_entries(out: &mut String, m: &ComplexMatrix) {
    out.push('[');
    for r in 0..m.rows() {
        if r > 0 {
            out.push(',');
        }
        out.push('[');
        for col in 0..m.cols() {
            if col > 0 {
                out.push(',');
            }
            let z = m[(r, col)];
            out.push('[');
            number(out, z.re);
            out.push(',');
            number(out, z.im);
            out.push(']');
        }
        out.push(']');
    }
    out.push(']');
}

/// Renders a square matrix in the file format.
pub fn write_matrix(m: &ComplexMatrix) -> String {
    let mut out = format!("{{\"dim\":{},\"entries\":", m.rows());
    write_entries(&mut out, m);
    out.push('}');
    out
}

/// Renders a channel in the file format.
pub fn write_channel(ch: &SioChannel) -> String {
    let mut out = format!("{{\"in_dim\":{},\"out_dim\":{},\"kraus\":[", ch.in_dim(), ch.out_dim());
    for (k, m) in ch.kraus().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write_entries(&mut out, m);
    }
    out.push_str("]}");
    out
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
