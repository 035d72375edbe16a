use super::DataError;
use crate::covariates::CovariateMatrix;
use crate::error::Error;
use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

/// Which columns of a table carry something other than covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub id_column: String,
    pub outcome_column: Option<String>,
    pub assignment_column: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id_column: "id".into(),
            outcome_column: None,
            assignment_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Option<Vec<String>>,
    pub covariate_names: Vec<String>,
    pub x: CovariateMatrix,
    pub y: Option<Vec<f64>>,
    pub z: Option<Vec<i8>>,
}

struct RawTable {
    header: Vec<String>,
    /// Cells with the 1-based file line they came from.
    rows: Vec<(u64, Vec<String>)>,
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|e| DataError::io(path, e))
}

fn parse_error(row: u64, column: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        row,
        column,
        message: message.into(),
    }
}

fn read_raw<R: Read>(reader: R) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_error(1, 1, "file is empty")),
        Some(r) => r.map_err(csv_error)?,
    };
    let header: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(parse_error(1, 1, "header row is missing"));
    }
    let mut seen = HashSet::new();
    for (c, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(parse_error(1, c + 1, "empty column name"));
        }
        if !seen.insert(h.as_str()) {
            return Err(DataError::DuplicateColumn(h.clone()));
        }
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    if rows.is_empty() {
        return Err(parse_error(2, 1, "no data rows"));
    }
    Ok(RawTable { header, rows })
}

fn csv_error(e: csv::Error) -> DataError {
    let row = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { len, expected_len, .. } => parse_error(
            row,
            (*len).min(*expected_len) as usize + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        _ => parse_error(row, 1, e.to_string()),
    }
}

fn parse_number(cell: &str, row: u64, column: usize) -> Result<f64, DataError> {
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_error(row, column, format!("{cell:?} is not a number")))?;
    if !v.is_finite() {
        return Err(DataError::NonFiniteValue { row, column });
    }
    Ok(v)
}

fn parse_sign(cell: &str, row: u64, column: usize) -> Result<i8, DataError> {
    let v = parse_number(cell, row, column)?;
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 {
        Ok(-1)
    } else {
        Err(parse_error(row, column, format!("{cell:?} is not +1 or -1")))
    }
}

impl RawTable {
    fn position(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn numbers(&self, c: usize) -> Result<Vec<f64>, DataError> {
        self.rows
            .iter()
            .map(|(line, r)| parse_number(&r[c], *line, c + 1))
            .collect()
    }
}

/// Reads a covariate table. Every column not named by the schema must be
/// numeric and becomes a covariate, in file order.
pub fn read_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let raw = read_raw(open(path)?)?;
    let id = raw.position(&schema.id_column);
    let lookup = |name: &Option<String>| -> Result<Option<usize>, DataError> {
        match name {
            None => Ok(None),
            Some(n) => raw
                .position(n)
                .map(Some)
                .ok_or_else(|| DataError::MissingColumn(n.clone())),
        }
    };
    let outcome = lookup(&schema.outcome_column)?;
    let assignment = lookup(&schema.assignment_column)?;
    let cov_cols: Vec<usize> = (0..raw.header.len())
        .filter(|c| Some(*c) != id && Some(*c) != outcome && Some(*c) != assignment)
        .collect();

    let n = raw.rows.len();
    let d = cov_cols.len();
    let mut data = Vec::with_capacity(n * d);
    for (line, r) in &raw.rows {
        for &c in &cov_cols {
            data.push(parse_number(&r[c], *line, c + 1)?);
        }
    }
    let y = outcome.map(|c| raw.numbers(c)).transpose()?;
    let z = assignment
        .map(|c| {
            raw.rows
                .iter()
                .map(|(line, r)| parse_sign(&r[c], *line, c + 1))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    Ok(Dataset {
        ids: id.map(|c| raw.rows.iter().map(|(_, r)| r[c].clone()).collect()),
        covariate_names: cov_cols.iter().map(|&c| raw.header[c].clone()).collect(),
        x: CovariateMatrix::new(n, d, data)?,
        y,
        z,
    })
}

/// One numeric column of a CSV file, by name.
pub fn read_column(path: &Path, name: &str) -> Result<Vec<f64>, DataError> {
    let raw = read_raw(open(path)?)?;
    let c = raw
        .position(name)
        .ok_or_else(|| DataError::MissingColumn(name.into()))?;
    raw.numbers(c)
}

/// `"uniform"` gives `½` for every unit; anything else is a file with a
/// `pi` column of length `n`.
pub fn read_probabilities(source: &str, n: usize) -> Result<Vec<f64>, DataError> {
    if source == "uniform" {
        return Ok(vec![0.5; n]);
    }
    let pi = read_column(Path::new(source), "pi")?;
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pi.len(),
        }
        .into());
    }
    Ok(pi)
}

/// Writes one column per replicate, headed `rep_1 … rep_K`, one row per unit.
pub fn write_assignments<W: Write>(writer: W, replicates: &[Vec<i8>]) -> Result<(), DataError> {
    let n = replicates.first().map_or(0, Vec::len);
    if let Some(bad) = replicates.iter().find(|z| z.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        }
        .into());
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let wrap = |e: csv::Error| parse_error(0, 0, e.to_string());
    w.write_record((1..=replicates.len()).map(|k| format!("rep_{k}")))
        .map_err(wrap)?;
    for i in 0..n {
        w.write_record(replicates.iter().map(|z| if z[i] > 0 { "1" } else { "-1" }))
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| DataError::io("<output>", e))?;
    Ok(())
}

/// Reads an assignments file back as one `±1` vector per column. An `id`
/// column, if present, is skipped.
pub fn read_assignments(path: &Path) -> Result<Vec<Vec<i8>>, DataError> {
    let raw = read_raw(open(path)?)?;
    let id = raw.position("id");
    (0..raw.header.len())
        .filter(|&c| Some(c) != id)
        .map(|c| {
            raw.rows
                .iter()
                .map(|(line, r)| parse_sign(&r[c], *line, c + 1))
                .collect()
        })
        .collect()
}
