//! CSV readers and writers.
//!
//! Matrices are plain comma-separated numeric rows. A header row is allowed
//! and recognized by a non-numeric first field. Vectors are single-column
//! matrices. Rows and columns in error messages are 1-based and count the
//! header line, so they match what an editor shows.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use polyls_core::DenseMatrix;

use crate::bench::BenchRecord;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: row {row}, column {col}: cannot parse {token:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        token: String,
    },

    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: no data rows")]
    Empty { path: PathBuf },

    #[error("{path}: expected a single column, found {found}")]
    NotAVector { path: PathBuf, found: usize },

    #[error("{path}: missing column {column:?} in header")]
    MissingColumn { path: PathBuf, column: &'static str },

    #[error(transparent)]
    Core(#[from] polyls_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn open(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

fn parse_field(path: &Path, row: usize, col: usize, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            row,
            col,
            token: token.to_owned(),
        })
}

/// Reads a numeric matrix, skipping a header row if the first field of the
/// first row is not a number.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut reader = open(path, false)?;
    let mut rows: Vec<f64> = Vec::new();
    let mut width = None;
    let mut n_rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if k == 0 && record.get(0).is_some_and(|t| t.parse::<f64>().is_err()) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Ragged {
                path: path.to_owned(),
                row: line,
                expected,
                found: record.len(),
            });
        }
        for (c, token) in record.iter().enumerate() {
            rows.push(parse_field(path, line, c + 1, token)?);
        }
        n_rows += 1;
    }
    let Some(n_cols) = width else {
        return Err(Error::Empty { path: path.to_owned() });
    };
    Ok(DenseMatrix::from_row_major(n_rows, n_cols, &rows)?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.n_cols() != 1 {
        return Err(Error::NotAVector {
            path: path.to_owned(),
            found: m.n_cols(),
        });
    }
    Ok(m.column(0).to_vec())
}

/// A bound given either as a scalar (`0`, `-inf`, `2.5`) applied to every
/// coordinate or as a path to a vector file.
pub fn read_bound(arg: &str, p: usize) -> Result<Vec<f64>> {
    match arg.trim().parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(vec![v; p]),
        _ => read_vector(Path::new(arg)),
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes one value per line.
pub fn write_vector(out: &mut (impl Write + ?Sized), v: &[f64]) -> io::Result<()> {
    for &x in v {
        writeln!(out, "{}", fmt_num(x))?;
    }
    Ok(())
}

pub fn write_vector_file(path: &Path, v: &[f64]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write_vector(&mut w, v).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads a `time,value` series with a header row. Rows whose value is empty
/// are skipped; times must be ascending.
pub fn read_spike_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = open(path, true)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |column: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(column))
            .ok_or(Error::MissingColumn {
                path: path.to_owned(),
                column,
            })
    };
    let (tc, vc) = (find("time")?, find("value")?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(k + 2, |p| p.line() as usize);
        let value = record.get(vc).unwrap_or("");
        if value.is_empty() {
            continue;
        }
        times.push(parse_field(path, line, tc + 1, record.get(tc).unwrap_or(""))?);
        values.push(parse_field(path, line, vc + 1, value)?);
    }
    if times.is_empty() {
        return Err(Error::Empty { path: path.to_owned() });
    }
    Ok((times, values))
}

pub const BENCH_HEADER: [&str; 6] = [
    "instance",
    "solver",
    "wall_time_s",
    "objective",
    "n_positive",
    "kkt_passed",
];

pub fn write_bench_csv(out: impl Write, records: &[BenchRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER)?;
    for r in records {
        w.write_record([
            r.instance.clone(),
            r.solver.to_string(),
            r.wall_time_s.to_string(),
            fmt_num(r.objective),
            r.n_positive.to_string(),
            r.kkt_passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
