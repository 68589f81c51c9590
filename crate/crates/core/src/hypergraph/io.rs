//! Text formats.
//!
//! * Hyperedge list: one hyperedge per line, whitespace-separated 0-based
//!   node indices. Lines starting with `#` are comments. Blank lines are
//!   rejected, since they would denote an empty hyperedge.
//! * Dense features: header `num_nodes feature_dim`, then one row per node
//!   of whitespace-separated decimal floats.
//! * Sparse features: header `num_nodes feature_dim`, then
//!   `node_index dim_index value` triplets; unlisted entries are zero.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{HadError, Result};

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HadError::io(path, e))
}

/// Iterates `(1-based line number, line)` skipping `#` comments.
pub(crate) fn content_lines<'a, R: BufRead + 'a>(
    reader: R,
    source_name: &'a str,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(HadError::io(source_name, e))),
            Ok(l) if l.trim_start().starts_with('#') => None,
            Ok(l) => Some(Ok((i + 1, l))),
        })
}

fn parse_token<T: std::str::FromStr>(
    tok: &str,
    source: &str,
    line: usize,
    what: &str,
) -> Result<T> {
    tok.parse()
        .map_err(|_| HadError::parse(source, line, format!("invalid {what} `{tok}`")))
}

pub fn read_edge_list<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Vec<usize>>> {
    Ok(read_edge_list_with_lines(reader, source_name)?
        .into_iter()
        .map(|(_, e)| e)
        .collect())
}

/// Like [`read_edge_list`] but also returns the line number of each edge,
/// for diagnostics that need to point back into the file.
pub fn read_edge_list_with_lines<R: BufRead>(
    reader: R,
    source_name: &str,
) -> Result<Vec<(usize, Vec<usize>)>> {
    let mut edges = Vec::new();
    for item in content_lines(reader, source_name) {
        let (line_no, line) = item?;
        let edge = line
            .split_whitespace()
            .map(|t| parse_token(t, source_name, line_no, "node index"))
            .collect::<Result<Vec<usize>>>()?;
        if edge.is_empty() {
            return Err(HadError::parse(source_name, line_no, "empty hyperedge"));
        }
        edges.push((line_no, edge));
    }
    Ok(edges)
}

pub fn read_edge_list_file(path: &Path) -> Result<Vec<Vec<usize>>> {
    read_edge_list(open(path)?, &path.display().to_string())
}

pub fn write_edge_list<W: Write>(mut w: W, edges: &[Vec<usize>]) -> std::io::Result<()> {
    for edge in edges {
        let mut line = String::new();
        for (k, v) in edge.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{v}");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn read_header(
    lines: &mut impl Iterator<Item = Result<(usize, String)>>,
    source_name: &str,
) -> Result<(usize, usize)> {
    let (line_no, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| HadError::parse(source_name, 1, "missing `num_nodes feature_dim` header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(HadError::parse(
            source_name,
            line_no,
            "header must be `num_nodes feature_dim`",
        ));
    }
    Ok((
        parse_token(toks[0], source_name, line_no, "num_nodes")?,
        parse_token(toks[1], source_name, line_no, "feature_dim")?,
    ))
}

pub fn read_dense_features<R: BufRead>(reader: R, source_name: &str) -> Result<Array2<f64>> {
    let mut lines = content_lines(reader, source_name);
    let (rows, cols) = read_header(&mut lines, source_name)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for item in lines {
        let (line_no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(HadError::parse(
                source_name,
                line_no,
                format!("more than {rows} rows"),
            ));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_token::<f64>(tok, source_name, line_no, "value")?);
        }
        if data.len() - before != cols {
            return Err(HadError::parse(
                source_name,
                line_no,
                format!("expected {cols} values, found {}", data.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(HadError::FeatureRowMismatch {
            expected: rows,
            found: seen,
        });
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked"))
}

pub fn read_sparse_features<R: BufRead>(reader: R, source_name: &str) -> Result<Array2<f64>> {
    let mut lines = content_lines(reader, source_name);
    let (rows, cols) = read_header(&mut lines, source_name)?;
    let mut out = Array2::zeros((rows, cols));
    for item in lines {
        let (line_no, line) = item?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 3 {
            return Err(HadError::parse(
                source_name,
                line_no,
                "expected `node_index dim_index value`",
            ));
        }
        let node: usize = parse_token(toks[0], source_name, line_no, "node index")?;
        let dim: usize = parse_token(toks[1], source_name, line_no, "dim index")?;
        let value: f64 = parse_token(toks[2], source_name, line_no, "value")?;
        if node >= rows || dim >= cols {
            return Err(HadError::parse(
                source_name,
                line_no,
                format!("entry ({node}, {dim}) outside {rows}x{cols}"),
            ));
        }
        out[[node, dim]] = value;
    }
    Ok(out)
}

/// Writes the dense format. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_dense_features<W: Write>(mut w: W, features: &Array2<f64>) -> std::io::Result<()> {
    writeln!(w, "{} {}", features.nrows(), features.ncols())?;
    for row in features.rows() {
        let mut line = String::new();
        for (k, x) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{x}");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
