//! Sample-by-feature matrices, histograms and class labels, plus their
//! delimited-text I/O.
//!
//! Tables may carry a header row and/or an identifier column; both are
//! detected from content. Lines starting with `#` are comments, which lets
//! every file written by this crate carry a provenance header.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on histogram row sums.
pub const HISTOGRAM_SUM_TOL: f64 = 1e-12;

/// Field delimiter of a delimited text table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }

    /// Guess from a file extension; anything but `.tsv`/`.tab` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => TableFormat::Tsv,
            _ => TableFormat::Csv,
        }
    }
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "tsv" => Ok(TableFormat::Tsv),
            other => Err(Error::Parameter(format!("unknown table format {other:?}"))),
        }
    }
}

/// Dense `n × m` matrix of samples (rows) by features (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
}

impl DataMatrix {
    /// Builds a matrix with default identifiers `s1..sn` and `f1..fm`.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let row_ids = (1..=values.nrows()).map(|i| format!("s{i}")).collect();
        let col_ids = (1..=values.ncols()).map(|j| format!("f{j}")).collect();
        Self::with_ids(values, row_ids, col_ids)
    }

    pub fn with_ids(values: DMatrix<f64>, row_ids: Vec<String>, col_ids: Vec<String>) -> Result<Self> {
        let (n, m) = values.shape();
        if n < 2 || m < 2 {
            return Err(Error::Dimension(format!(
                "data matrix must be at least 2x2, got {n}x{m}"
            )));
        }
        if row_ids.len() != n || col_ids.len() != m {
            return Err(Error::Dimension(format!(
                "{} row ids and {} column ids for a {n}x{m} matrix",
                row_ids.len(),
                col_ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self {
            values,
            row_ids,
            col_ids,
        })
    }

    /// Builds from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("rows of unequal length".into()));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Rows of a data matrix normalized to discrete probability distributions.
///
/// Stored row-major so each histogram is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    m: usize,
    data: Vec<f64>,
}

impl HistogramSet {
    /// Wraps rows that are already histograms; fails if any is not.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "histogram {i} has length {}, expected {m}",
                    row.len()
                )));
            }
            check_histogram(row, HISTOGRAM_SUM_TOL).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("row {i}: {msg}")),
                other => other,
            })?;
            data.extend_from_slice(row);
        }
        Ok(Self { m, data })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.m).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.m.max(1))
    }

    /// Renormalizes every row. Idempotent on valid histograms up to rounding.
    pub fn normalized(&self) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.rows().map(<[f64]>::to_vec).collect();
        normalize_row_vectors(&rows, self.m)
    }
}

/// Divides each row by its ℓ1 norm.
pub fn normalize_rows(x: &DataMatrix) -> Result<HistogramSet> {
    let rows: Vec<Vec<f64>> = x.values.row_iter().map(|r| r.iter().copied().collect()).collect();
    normalize_row_vectors(&rows, x.ncols())
}

fn normalize_row_vectors(rows: &[Vec<f64>], m: usize) -> Result<HistogramSet> {
    let mut data = Vec::with_capacity(rows.len() * m);
    for (i, row) in rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "row {i} has invalid entry {} at column {j}; histograms need nonnegative finite values",
                row[j]
            )));
        }
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain(format!("row {i} is all zero and cannot be normalized")));
        }
        data.extend(row.iter().map(|v| v / total));
    }
    Ok(HistogramSet { m, data })
}

/// Checks nonnegativity and unit mass within `tol`.
pub fn check_histogram(h: &[f64], tol: f64) -> Result<()> {
    if let Some(j) = h.iter().position(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "entry {j} is {} (must be finite and >= 0)",
            h[j]
        )));
    }
    let total: f64 = h.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::Domain(format!("mass sums to {total}, expected 1")));
    }
    Ok(())
}

/// Class labels aligned with the rows of a data matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(pub Vec<String>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Dense class ids, assigned in sorted order of the distinct labels.
    pub fn class_ids(&self) -> (Vec<usize>, Vec<String>) {
        let mut classes = self.0.clone();
        classes.sort();
        classes.dedup();
        let ids = self
            .0
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        (ids, classes)
    }
}

impl<S: ToString> FromIterator<S> for LabelVector {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        LabelVector(iter.into_iter().map(|s| s.to_string()).collect())
    }
}

/// Formats a value so that parsing it back yields the same bits.
pub fn format_f64(v: f64) -> String {
    // Debug is the shortest representation that round-trips exactly.
    format!("{v:?}")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(rdr: R, format: TableFormat) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn records<R: Read>(rdr: R, format: TableFormat) -> Result<Vec<(u64, Vec<String>)>> {
    let mut out = Vec::new();
    for rec in reader(rdr, format).records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn is_numeric(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

pub fn load_matrix(path: impl AsRef<Path>, format: TableFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    read_matrix(open(path)?, format)
}

/// Parses a rectangular numeric table with optional header row and id column.
pub fn read_matrix<R: Read>(rdr: R, format: TableFormat) -> Result<DataMatrix> {
    let recs = records(rdr, format)?;
    let Some((first_line, first)) = recs.first() else {
        return Err(Error::Parse {
            line: 1,
            message: "empty input".into(),
        });
    };
    let has_header = first.iter().skip(1).any(|c| !is_numeric(c)) || (first.len() == 1 && !is_numeric(&first[0]));
    let body = if has_header { &recs[1..] } else { &recs[..] };
    let Some((_, first_data)) = body.first() else {
        return Err(Error::Parse {
            line: *first_line,
            message: "no data rows".into(),
        });
    };
    let has_id_col = !is_numeric(&first_data[0]);
    let width = first_data.len();
    let m = width - usize::from(has_id_col);

    let mut row_ids = Vec::with_capacity(body.len());
    let mut flat = Vec::with_capacity(body.len() * m);
    for (line, rec) in body {
        if rec.len() != width {
            return Err(Error::Parse {
                line: *line,
                message: format!("expected {width} cells, found {}", rec.len()),
            });
        }
        let cells = if has_id_col {
            row_ids.push(rec[0].clone());
            &rec[1..]
        } else {
            row_ids.push(format!("s{}", row_ids.len() + 1));
            &rec[..]
        };
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: *line,
                message: format!("non-numeric cell {cell:?} in column {}", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            flat.push(v);
        }
    }

    let col_ids = if has_header {
        let (line, hdr) = &recs[0];
        // A header may or may not carry a label for the id column.
        let names = if hdr.len() == m {
            &hdr[..]
        } else if hdr.len() == m + 1 {
            &hdr[1..]
        } else {
            return Err(Error::Parse {
                line: *line,
                message: format!("header has {} cells for {m} data columns", hdr.len()),
            });
        };
        names.to_vec()
    } else {
        (1..=m).map(|j| format!("f{j}")).collect()
    };

    let n = row_ids.len();
    let values = DMatrix::from_row_slice(n, m, &flat);
    DataMatrix::with_ids(values, row_ids, col_ids)
}

/// Writes `x` with a header row and id column. `comment` lines are prefixed with `#`.
pub fn write_matrix<W: Write>(
    mut out: W,
    x: &DataMatrix,
    format: TableFormat,
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(&mut out, comment)?;
    write_labeled_table(&mut out, format, "id", x.col_ids(), x.row_ids(), |i, j| x.get(i, j))
}

pub fn save_matrix(path: impl AsRef<Path>, x: &DataMatrix, format: TableFormat, comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_matrix(&mut buf, x, format, comment).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_comment<W: Write>(out: &mut W, comment: Option<&str>) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

pub(crate) fn write_labeled_table<W: Write>(
    out: &mut W,
    format: TableFormat,
    corner: &str,
    col_ids: &[String],
    row_ids: &[String],
    value: impl Fn(usize, usize) -> f64,
) -> std::io::Result<()> {
    let sep = format.delimiter() as char;
    write!(out, "{corner}")?;
    for c in col_ids {
        write!(out, "{sep}{c}")?;
    }
    writeln!(out)?;
    for (i, r) in row_ids.iter().enumerate() {
        write!(out, "{r}")?;
        for j in 0..col_ids.len() {
            write!(out, "{sep}{}", format_f64(value(i, j)))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads labels from a one-column file, or a two-column `id,label` file.
/// A first row whose last cell reads `label` or `class` is treated as a header.
pub fn read_labels<R: Read>(rdr: R, format: TableFormat) -> Result<LabelVector> {
    let recs = records(rdr, format)?;
    let mut labels = Vec::with_capacity(recs.len());
    for (idx, (line, rec)) in recs.iter().enumerate() {
        let last = rec.last().map(String::as_str).unwrap_or("");
        if idx == 0 && matches!(last.to_ascii_lowercase().as_str(), "label" | "class" | "labels") {
            continue;
        }
        match rec.len() {
            1 | 2 => labels.push(last.to_owned()),
            k => {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("label rows need 1 or 2 cells, found {k}"),
                })
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no labels".into(),
        });
    }
    Ok(LabelVector(labels))
}

pub fn load_labels(path: impl AsRef<Path>, format: TableFormat) -> Result<LabelVector> {
    let path = path.as_ref();
    read_labels(open(path)?, format)
}

pub fn write_labels<W: Write>(
    mut out: W,
    labels: &LabelVector,
    row_ids: &[String],
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(&mut out, comment)?;
    writeln!(out, "id,label")?;
    for (id, l) in row_ids.iter().zip(&labels.0) {
        writeln!(out, "{id},{l}")?;
    }
    Ok(())
}

/// Reads a numeric vector: one value per line (`value` or `name,value`), or a
/// single row of values. Returns names when present.
pub fn read_vector<R: Read>(rdr: R, format: TableFormat) -> Result<(Vec<f64>, Option<Vec<String>>)> {
    let recs = records(rdr, format)?;
    if recs.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty input".into(),
        });
    }
    let parse = |line: u64, cell: &str| -> Result<f64> {
        cell.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("non-numeric cell {cell:?}"),
            })
    };
    if recs.len() == 1 && recs[0].1.len() > 2 {
        let (line, rec) = &recs[0];
        let vals = rec.iter().map(|c| parse(*line, c)).collect::<Result<_>>()?;
        return Ok((vals, None));
    }
    let mut vals = Vec::with_capacity(recs.len());
    let mut names = Vec::new();
    for (line, rec) in &recs {
        match rec.as_slice() {
            [v] => vals.push(parse(*line, v)?),
            [name, v] => {
                names.push(name.clone());
                vals.push(parse(*line, v)?);
            }
            _ => {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("expected 1 or 2 cells, found {}", rec.len()),
                })
            }
        }
    }
    if !names.is_empty() && names.len() != vals.len() {
        return Err(Error::Parse {
            line: recs[0].0,
            message: "mixed named and unnamed rows".into(),
        });
    }
    Ok((vals, (!names.is_empty()).then_some(names)))
}

pub fn load_vector(path: impl AsRef<Path>, format: TableFormat) -> Result<(Vec<f64>, Option<Vec<String>>)> {
    let path = path.as_ref();
    read_vector(open(path)?, format)
}
