//! Matrix Market coordinate files and one-value-per-line vector files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const MM_BANNER: &str = "%%MatrixMarket";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a `coordinate real general` (or `integer general`) Matrix Market
/// stream. Indices on disk are 1-based.
pub fn parse_matrix_market<R: Read>(reader: R) -> Result<SparseMatrix> {
    let mut lines = BufReader::new(reader).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != MM_BANNER.to_ascii_lowercase() || tokens[1] != "matrix"
    {
        return Err(parse_err(1, format!("bad Matrix Market header: {header:?}")));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, "only the coordinate format is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field type {:?}", tokens[3])));
    }
    if tokens[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry {:?}", tokens[4])));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected `rows cols nnz`"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("bad size field {s:?}")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((nrows, ncols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected `row col value`"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad row index {:?}", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad column index {:?}", fields[1])))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad value {:?}", fields[2])))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(Error::IndexOutOfBounds {
                        row: i,
                        col: j,
                        nrows,
                        ncols,
                    });
                }
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                triplets.push((i - 1, j - 1, v));
            }
        }
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            0,
            format!("header declares {nnz} entries, found {}", triplets.len()),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, triplets)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(fs::File::open(path)?)
}

pub fn format_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{MM_BANNER} matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    format_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

/// One real per line. Blank lines are skipped; anything else that does not
/// parse as a finite number (including a header) is an error.
pub fn parse_vector<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("not a number: {t:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(idx + 1, "non-finite value"));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(fs::File::open(path)?)
}

pub fn format_vector<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}

pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    format_vector(v, &mut w)?;
    w.flush()?;
    Ok(())
}
