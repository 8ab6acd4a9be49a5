//! Labeled multivariate samples: the data model and its ingestion.
//!
//! A [`SampleMatrix`] holds n i.i.d. observations of one distribution as an
//! n×d matrix (rows = samples, columns = metrics). [`LabeledSamples`] is an
//! ordered collection of such matrices sharing d, one per candidate label.
//!
//! Three on-disk formats are supported:
//! * `csv-long` — canonical; header `label,m1,...,md`, one observation per row;
//! * `csv-wide` — one file per label, header `m1,...,md`; the label is the file stem;
//! * `json` — array of `{"label": string, "rows": [[...], ...]}`.

use crate::error::{Error, Result};
use crate::{Matrix, Real};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

/// n×d matrix of finite real observations for one distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    values: Matrix,
}

impl SampleMatrix {
    /// Validates and wraps a raw matrix. Fails on zero rows, zero columns, or
    /// any non-finite entry (reported with its index).
    pub fn new(values: Matrix) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::ZeroRows);
        }
        if values.ncols() == 0 {
            return Err(Error::ZeroCols);
        }
        for ((row, col), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(SampleMatrix { values })
    }

    /// Builds from row vectors; all rows must share a length ≥ 1.
    pub fn from_rows(rows: &[Vec<Real>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::ZeroRows);
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    context: format!("row {i}"),
                    expected: d,
                    got: r.len(),
                });
            }
        }
        let flat: Vec<Real> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), d), flat)
            .expect("shape checked above");
        SampleMatrix::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }
}

/// Re-checks the invariants of an already-built matrix. Idempotent; exists so
/// callers holding a matrix of unknown provenance can force a check.
pub fn validate(m: SampleMatrix) -> Result<SampleMatrix> {
    SampleMatrix::new(m.into_values())
}

/// Ordered collection of labeled sample matrices with a shared metric
/// dimension. Ranking requires k ≥ 2 entries, but loading a single label is
/// legal (two-sample workflows assemble collections from csv-wide files).
#[derive(Clone, Debug)]
pub struct LabeledSamples {
    entries: Vec<(String, SampleMatrix)>,
}

impl LabeledSamples {
    pub fn new(entries: Vec<(String, SampleMatrix)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::parse("<samples>", "no rows"));
        }
        let d = entries[0].1.d();
        for (label, m) in &entries {
            if m.d() != d {
                return Err(Error::DimensionMismatch {
                    context: format!("label `{label}`"),
                    expected: d,
                    got: m.d(),
                });
            }
        }
        for (i, (label, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(other, _)| other == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(LabeledSamples { entries })
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn d(&self) -> usize {
        self.entries[0].1.d()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn get(&self, i: usize) -> (&str, &SampleMatrix) {
        let (l, m) = &self.entries[i];
        (l.as_str(), m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SampleMatrix)> {
        self.entries.iter().map(|(l, m)| (l.as_str(), m))
    }

    /// Appends the entries of `other`; labels must stay unique and d shared.
    pub fn merge(self, other: LabeledSamples) -> Result<Self> {
        let mut entries = self.entries;
        entries.extend(other.entries);
        LabeledSamples::new(entries)
    }
}

/// On-disk sample formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFormat {
    CsvLong,
    CsvWide,
    Json,
}

impl fmt::Display for SampleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleFormat::CsvLong => write!(f, "csv-long"),
            SampleFormat::CsvWide => write!(f, "csv-wide"),
            SampleFormat::Json => write!(f, "json"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    label: String,
    rows: Vec<Vec<Real>>,
}

/// Loads labeled samples from `path` under the declared format. Row counts
/// and metric column order are preserved; parse failures carry a locus.
pub fn load_samples(path: impl AsRef<Path>, format: SampleFormat) -> Result<LabeledSamples> {
    let path = path.as_ref();
    match format {
        SampleFormat::CsvLong => load_csv_long(path),
        SampleFormat::CsvWide => load_csv_wide(path),
        SampleFormat::Json => load_json(path),
    }
}

fn locus(path: &Path, line: u64, col: usize) -> String {
    format!("{}:{} column {}", path.display(), line, col + 1)
}

fn load_csv_long(path: &Path) -> Result<LabeledSamples> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        .clone();
    if headers.is_empty() || headers.get(0) != Some("label") {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            "csv-long requires a header starting with `label`",
        ));
    }
    let d = headers.len() - 1;
    if d == 0 {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            "csv-long requires at least one metric column",
        ));
    }

    // Rows of one label may interleave with others; order of first
    // appearance fixes the label order.
    let mut order: Vec<String> = Vec::new();
    let mut rows_by_label: Vec<Vec<Vec<Real>>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| map_csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record.get(0).unwrap_or_default().to_string();
        if label.is_empty() {
            return Err(Error::parse(locus(path, line, 0), "empty label"));
        }
        let mut row = Vec::with_capacity(d);
        for (c, field) in record.iter().skip(1).enumerate() {
            let v: Real = field.trim().parse().map_err(|_| {
                Error::parse(locus(path, line, c + 1), format!("non-numeric cell `{field}`"))
            })?;
            row.push(v);
        }
        match order.iter().position(|l| l == &label) {
            Some(i) => rows_by_label[i].push(row),
            None => {
                order.push(label);
                rows_by_label.push(vec![row]);
            }
        }
    }
    if order.is_empty() {
        return Err(Error::parse(path.display().to_string(), "no rows"));
    }

    let mut entries = Vec::with_capacity(order.len());
    for (label, rows) in order.into_iter().zip(rows_by_label) {
        let m = SampleMatrix::from_rows(&rows)
            .map_err(|e| e.in_stage(format!("label `{label}` in {}", path.display())))?;
        entries.push((label, m));
    }
    LabeledSamples::new(entries)
}

fn load_csv_wide(path: &Path) -> Result<LabeledSamples> {
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::parse(path.display().to_string(), "cannot derive label from file name"))?
        .to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let d = reader
        .headers()
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        .len();
    if d == 0 {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            "csv-wide requires at least one metric column",
        ));
    }
    let mut rows: Vec<Vec<Real>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| map_csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(d);
        for (c, field) in record.iter().enumerate() {
            let v: Real = field.trim().parse().map_err(|_| {
                Error::parse(locus(path, line, c), format!("non-numeric cell `{field}`"))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path.display().to_string(), "no rows"));
    }
    let m = SampleMatrix::from_rows(&rows)
        .map_err(|e| e.in_stage(path.display().to_string()))?;
    LabeledSamples::new(vec![(label, m)])
}

fn map_csv_error(path: &Path, e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line().to_string(),
        None => "?".to_string(),
    };
    Error::parse(format!("{}:{}", path.display(), line), e.to_string())
}

fn load_json(path: &Path) -> Result<LabeledSamples> {
    let text = std::fs::read_to_string(path)?;
    let parsed: Vec<JsonEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(format!("{}:{}", path.display(), e.line()), e.to_string()))?;
    if parsed.is_empty() {
        return Err(Error::parse(path.display().to_string(), "no rows"));
    }
    let mut entries = Vec::with_capacity(parsed.len());
    for entry in parsed {
        let m = SampleMatrix::from_rows(&entry.rows)
            .map_err(|e| e.in_stage(format!("label `{}` in {}", entry.label, path.display())))?;
        entries.push((entry.label, m));
    }
    LabeledSamples::new(entries)
}

/// Serializes samples to `path`. `csv-wide` accepts a single label only (the
/// format has no label column); the other formats accept any collection.
/// Float formatting is shortest-round-trip, so load ∘ save is the identity.
pub fn save_samples(
    data: &LabeledSamples,
    path: impl AsRef<Path>,
    format: SampleFormat,
) -> Result<()> {
    let path = path.as_ref();
    match format {
        SampleFormat::CsvLong => {
            let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
            let d = data.d();
            write!(out, "label")?;
            for j in 1..=d {
                write!(out, ",m{j}")?;
            }
            writeln!(out)?;
            for (label, m) in data.iter() {
                for row in m.values().rows() {
                    write!(out, "{label}")?;
                    for v in row {
                        write!(out, ",{v}")?;
                    }
                    writeln!(out)?;
                }
            }
            out.flush()?;
            Ok(())
        }
        SampleFormat::CsvWide => {
            if data.k() != 1 {
                return Err(Error::InvalidArgument(
                    "csv-wide holds exactly one label per file".into(),
                ));
            }
            let (_, m) = data.get(0);
            let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
            let header: Vec<String> = (1..=m.d()).map(|j| format!("m{j}")).collect();
            writeln!(out, "{}", header.join(","))?;
            for row in m.values().rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
            out.flush()?;
            Ok(())
        }
        SampleFormat::Json => {
            let entries: Vec<JsonEntry> = data
                .iter()
                .map(|(label, m)| JsonEntry {
                    label: label.to_string(),
                    rows: m.values().rows().into_iter().map(|r| r.to_vec()).collect(),
                })
                .collect();
            let text = serde_json::to_string_pretty(&entries)?;
            std::fs::write(path, text + "\n")?;
            Ok(())
        }
    }
}
