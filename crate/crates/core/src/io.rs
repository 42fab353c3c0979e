//! CSV readers for attributes, dissimilarities, side information and partitions.
//!
//! Object indices in files are 1-based; everything returned is 0-based.

use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::{ConstraintSet, LabelSet};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(p) => parse_error(path, p.line() as usize, e.to_string()),
        None => Error::Csv(e),
    }
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().has_headers(headers).trim(csv::Trim::All).comment(Some(b'#')).from_reader(open(path)?))
}

fn number(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| parse_error(path, line, format!("expected a number, found {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

fn index(path: &Path, line: usize, field: &str, n: usize) -> Result<usize> {
    let i: usize =
        field.parse().map_err(|_| parse_error(path, line, format!("expected a 1-based index, found {field:?}")))?;
    if i == 0 || i > n {
        return Err(parse_error(path, line, format!("index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

/// Attribute table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

/// Reads a headed numeric CSV, dropping the columns named in `exclude`.
pub fn read_attributes(path: &Path, exclude: &[String]) -> Result<AttributeTable> {
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let keep: Vec<usize> = (0..header.len()).filter(|&k| !exclude.iter().any(|x| x == &header[k])).collect();
    if keep.is_empty() {
        return Err(parse_error(path, 1, "no attribute columns"));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, r + 2);
        if rec.len() != header.len() {
            return Err(parse_error(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        for &k in &keep {
            data.push(number(path, line, &rec[k])?);
        }
        rows += 1;
    }
    Ok(AttributeTable {
        names: keep.iter().map(|&k| header[k].to_string()).collect(),
        values: Array2::from_shape_vec((rows, keep.len()), data).expect("row-major fill"),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissimilarityFormat {
    /// Square when every row has `n` values and a zero diagonal, triplets otherwise.
    #[default]
    Auto,
    /// `n` rows of `n` values, no header.
    Square,
    /// Rows `i, j, delta` with 1-based indices; each unordered pair at least once.
    Triplet,
}

impl std::str::FromStr for DissimilarityFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "square" => Ok(Self::Square),
            "triplet" => Ok(Self::Triplet),
            _ => Err(Error::invalid(format!("unknown dissimilarity format {s:?}"))),
        }
    }
}

/// Reads a dissimilarity matrix; triplet input is filled symmetrically.
pub fn read_dissimilarities(path: &Path, format: DissimilarityFormat) -> Result<Array2<f64>> {
    let mut rdr = reader(path, false)?;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push((line_of(&rec, r + 1), rec.iter().map(str::to_string).collect()));
    }
    let format = match format {
        // square needs n fields per row and a zero diagonal; anything else is read as triplets
        DissimilarityFormat::Auto
            if rows
                .iter()
                .enumerate()
                .all(|(r, (_, f))| f.len() == rows.len() && f[r].trim().parse::<f64>().is_ok_and(|v| v == 0.0)) =>
        {
            DissimilarityFormat::Square
        }
        DissimilarityFormat::Auto => DissimilarityFormat::Triplet,
        f => f,
    };
    let n = rows.len();
    match format {
        DissimilarityFormat::Square => {
            let mut d = Array2::zeros((n, n));
            for (r, (line, fields)) in rows.iter().enumerate() {
                if fields.len() != n {
                    return Err(parse_error(path, *line, format!("expected {n} values, found {}", fields.len())));
                }
                for (k, f) in fields.iter().enumerate() {
                    let v = number(path, *line, f)?;
                    if v < 0.0 {
                        return Err(parse_error(path, *line, "negative dissimilarity"));
                    }
                    d[[r, k]] = v;
                }
            }
            Ok(d)
        }
        _ => {
            let mut triplets = Vec::with_capacity(n);
            let mut size = 0;
            for (line, fields) in &rows {
                if fields.len() != 3 {
                    return Err(parse_error(
                        path,
                        *line,
                        format!("expected i, j, delta; found {} fields", fields.len()),
                    ));
                }
                let i = index(path, *line, &fields[0], usize::MAX)?;
                let j = index(path, *line, &fields[1], usize::MAX)?;
                let v = number(path, *line, &fields[2])?;
                if v < 0.0 {
                    return Err(parse_error(path, *line, "negative dissimilarity"));
                }
                size = size.max(i + 1).max(j + 1);
                triplets.push((i, j, v));
            }
            let mut d = Array2::from_elem((size, size), f64::NAN);
            for k in 0..size {
                d[[k, k]] = 0.0;
            }
            for (i, j, v) in triplets {
                d[[i, j]] = v;
                if d[[j, i]].is_nan() {
                    d[[j, i]] = v;
                }
            }
            if let Some(((i, j), _)) = d.indexed_iter().find(|(_, v)| v.is_nan()) {
                return Err(parse_error(path, rows.len(), format!("no dissimilarity for pair ({}, {})", i + 1, j + 1)));
            }
            Ok(d)
        }
    }
}

/// Reads a headerless numeric matrix with rows of equal length.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = reader(path, false)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, r + 1);
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(parse_error(path, line, format!("expected {w} values, found {}", rec.len())));
        }
        for f in rec.iter() {
            data.push(number(path, line, f)?);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, width.unwrap_or(0)), data).expect("row-major fill"))
}

/// Reads rows `i, j, ML|CL` (1-based; an optional header is skipped).
pub fn read_constraints(path: &Path, n: usize) -> Result<ConstraintSet> {
    let mut rdr = reader(path, false)?;
    let (mut ml, mut cl) = (Vec::new(), Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, r + 1);
        if r == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_error(path, line, "expected i, j, type"));
        }
        let pair = (index(path, line, &rec[0], n)?, index(path, line, &rec[1], n)?);
        match rec[2].to_ascii_uppercase().as_str() {
            "ML" => ml.push(pair),
            "CL" => cl.push(pair),
            other => return Err(parse_error(path, line, format!("constraint type must be ML or CL, found {other:?}"))),
        }
    }
    ConstraintSet::new(n, ml, cl).map_err(|e| parse_error(path, 0, e.to_string()))
}

/// Reads rows `i, y` with 1-based object index and class.
pub fn read_labels(path: &Path, n: usize, clusters: usize) -> Result<LabelSet> {
    let mut rdr = reader(path, false)?;
    let mut entries = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, r + 1);
        if r == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_error(path, line, "expected i, y"));
        }
        entries.push((index(path, line, &rec[0], n)?, index(path, line, &rec[1], clusters)?));
    }
    LabelSet::new(n, clusters, entries).map_err(|e| parse_error(path, 0, e.to_string()))
}

/// Reads reference labels from a headed CSV: the column named `label`,
/// `class`, `species` or `truth`, otherwise the last column.
pub fn read_truth(path: &Path) -> Result<Vec<String>> {
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() {
        return Err(parse_error(path, 1, "empty header"));
    }
    let col = ["label", "class", "species", "truth"]
        .iter()
        .find_map(|name| header.iter().position(|h| h.eq_ignore_ascii_case(name)))
        .unwrap_or(header.len() - 1);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, out.len() + 2);
        out.push(rec.get(col).ok_or_else(|| parse_error(path, line, "missing label field"))?.to_string());
    }
    Ok(out)
}

/// Hard labels, outlier flags and masses of a partition CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    pub columns: Vec<String>,
    pub masses: Array2<f64>,
    pub labels: Vec<usize>,
    pub outliers: Vec<bool>,
}

pub fn read_partition(path: &Path) -> Result<PartitionTable> {
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let f = header.iter().take_while(|h| h.starts_with("m_")).count();
    if f < 2 || header.len() != f + 2 || &header[f] != "label" || &header[f + 1] != "outlier" {
        return Err(parse_error(path, 1, "expected mass columns followed by label and outlier"));
    }
    let (mut masses, mut labels, mut outliers) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, labels.len() + 2);
        if rec.len() != f + 2 {
            return Err(parse_error(path, line, format!("expected {} fields", f + 2)));
        }
        for k in 0..f {
            masses.push(number(path, line, &rec[k])?);
        }
        labels.push(index(path, line, &rec[f], usize::MAX)?);
        outliers.push(match &rec[f + 1] {
            "0" => false,
            "1" => true,
            other => return Err(parse_error(path, line, format!("outlier flag must be 0 or 1, found {other:?}"))),
        });
    }
    Ok(PartitionTable {
        columns: header.iter().take(f).map(str::to_string).collect(),
        masses: Array2::from_shape_vec((labels.len(), f), masses).expect("row-major fill"),
        labels,
        outliers,
    })
}

/// Writes a headerless square matrix.
pub fn write_square<W: std::io::Write>(d: &Array2<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in d.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<matrix>", e))?;
    Ok(())
}

/// Writes a headed attribute table.
pub fn write_attributes<W: std::io::Write>(names: &[String], x: &Array2<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names)?;
    for row in x.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<attributes>", e))?;
    Ok(())
}
