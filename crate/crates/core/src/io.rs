//! Matrix Market files for matrices and single-column CSV for vectors.
//!
//! Values are written in the shortest form that parses back to the same
//! bits, so a write/read cycle is exact. Free-form provenance lines go into
//! `%` comments (Matrix Market) or `#` comments (CSV).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Header line of single-column vector files.
pub const VECTOR_HEADER: &str = "value";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{tok}' as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

/// Writes `m` in Matrix Market `array real general` format (column-major).
pub fn write_matrix_market<W: Write>(mut w: W, m: &DenseMatrix, comments: &[String]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    for c in comments {
        writeln!(w, "% {c}")?;
    }
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            writeln!(w, "{:?}", m[(i, j)])?;
        }
    }
    Ok(())
}

/// Reads a real Matrix Market file in array or coordinate format with
/// general, symmetric or skew-symmetric storage.
pub fn read_matrix_market<R: Read>(r: R) -> Result<DenseMatrix> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(ln, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(ln, format!("unsupported format '{other}'"))),
    };
    let pattern = match fields[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" if coordinate => true,
        other => return Err(parse_err(ln, format!("unsupported field '{other}'"))),
    };
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(ln, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter_map(|(ln, l)| match l {
        Ok(s) => {
            let t = s.trim().to_string();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((ln, t)))
            }
        }
        Err(e) => Some(Err(e)),
    });

    let (ln, size) = body.next().ok_or_else(|| parse_err(ln, "missing size line"))??;
    let mut toks = size.split_whitespace();
    let rows = parse_usize(toks.next(), ln, "row count")?;
    let cols = parse_usize(toks.next(), ln, "column count")?;
    if rows == 0 || cols == 0 {
        return Err(parse_err(ln, "empty matrix"));
    }
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(ln, "symmetric storage needs a square matrix"));
    }
    let mut m = DenseMatrix::zeros(rows, cols);

    if coordinate {
        let nnz = parse_usize(toks.next(), ln, "entry count")?;
        for _ in 0..nnz {
            let (ln, line) = body
                .next()
                .ok_or_else(|| parse_err(ln, "fewer entries than declared"))??;
            let mut t = line.split_whitespace();
            let i = parse_usize(t.next(), ln, "row index")?;
            let j = parse_usize(t.next(), ln, "column index")?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
            }
            let v = if pattern {
                1.0
            } else {
                parse_f64(t.next().ok_or_else(|| parse_err(ln, "missing value"))?, ln)?
            };
            let (i, j) = (i - 1, j - 1);
            m[(i, j)] += v;
            if i != j {
                match symmetry {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j, i)] += v,
                    Symmetry::SkewSymmetric => m[(j, i)] -= v,
                }
            }
        }
    } else {
        // column-major; symmetric variants store the lower triangle only
        let positions: Vec<(usize, usize)> = match symmetry {
            Symmetry::General => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
            Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
            Symmetry::SkewSymmetric => {
                (0..cols).flat_map(|j| (j + 1..rows).map(move |i| (i, j))).collect()
            }
        };
        let mut last = ln;
        for (i, j) in positions {
            let (ln, line) = body
                .next()
                .ok_or_else(|| parse_err(last, "fewer values than the declared size"))??;
            last = ln;
            let v = parse_f64(line.split_whitespace().next().unwrap_or(""), ln)?;
            m[(i, j)] = v;
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] = v,
                Symmetry::SkewSymmetric => m[(j, i)] = -v,
            }
        }
    }
    if let Some(extra) = body.next() {
        let (ln, _) = extra?;
        return Err(parse_err(ln, "more values than the declared size"));
    }
    Ok(m)
}

/// Writes one value per line under a `value` header.
pub fn write_vector_csv<W: Write>(mut w: W, v: &[f64], comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{VECTOR_HEADER}")?;
    for x in v {
        writeln!(w, "{x:?}")?;
    }
    Ok(())
}

/// Reads a single-column CSV. `#` comments, blank lines and a leading
/// non-numeric header are skipped.
pub fn read_vector_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let first = t.split(',').next().unwrap_or("").trim();
        if out.is_empty() && !seen_header && first.parse::<f64>().is_err() {
            seen_header = true;
            continue;
        }
        out.push(parse_f64(first, i + 1)?);
    }
    if out.is_empty() {
        return Err(parse_err(1, "no values"));
    }
    Ok(out)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DenseMatrix, comments: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market(&mut w, m, comments)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_matrix_market(File::open(path)?)
}

pub fn save_vector(path: impl AsRef<Path>, v: &[f64], comments: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vector_csv(&mut w, v, comments)?;
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_vector_csv(File::open(path)?)
}
