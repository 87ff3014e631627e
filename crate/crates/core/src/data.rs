//! Main-study and validation-study tables, and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Main study: surrogate Z, outcome Y and covariates. The true exposure is never observed here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MainStudy {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub covariates: IndexMap<String, Vec<f64>>,
}

/// Validation study: true exposure X, surrogate Z and covariates. No outcome.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationStudy {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub covariates: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub main: MainStudy,
    pub validation: ValidationStudy,
}

impl MainStudy {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates.get(name).map(Vec::as_slice)
    }

    /// Column lookup by role name ("z", "y") or covariate name.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        match name {
            "z" => Some(&self.z),
            "y" => Some(&self.y),
            _ => self.covariate(name),
        }
    }

    /// Share of ones in Y when Y is binary.
    pub fn prevalence(&self) -> Option<f64> {
        if self.y.is_empty() || self.y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return None;
        }
        Some(self.y.iter().sum::<f64>() / self.y.len() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        check_lengths("main", self.z.len(), [("y", self.y.len())], &self.covariates)
    }
}

impl ValidationStudy {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates.get(name).map(Vec::as_slice)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        match name {
            "z" => Some(&self.z),
            "x" => Some(&self.x),
            _ => self.covariate(name),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_lengths("validation", self.z.len(), [("x", self.x.len())], &self.covariates)
    }
}

fn check_lengths<const N: usize>(
    sample: &str,
    n: usize,
    fixed: [(&str, usize); N],
    covariates: &IndexMap<String, Vec<f64>>,
) -> Result<()> {
    let named = fixed
        .into_iter()
        .chain(covariates.iter().map(|(k, v)| (k.as_str(), v.len())));
    for (name, len) in named {
        if len != n {
            return Err(Error::DimensionMismatch(format!(
                "{sample} column '{name}' has {len} rows, expected {n}"
            )));
        }
    }
    Ok(())
}

/// A numeric CSV table held column-wise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: IndexMap<String, Vec<f64>>,
    pub n_rows: usize,
}

impl Table {
    /// Parse CSV text with a header row. Every field must be a finite number;
    /// empty or non-numeric fields are rejected with the offending row (1-based, header is row 1).
    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Schema(format!("{source}: missing header row")));
        }
        let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
        for h in &headers {
            if columns.insert(h.clone(), Vec::new()).is_some() {
                return Err(Error::Schema(format!("{source}: duplicate column '{h}'")));
            }
        }
        let mut n_rows = 0;
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Schema(format!(
                    "{source} row {row}: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                )));
            }
            for (field, (name, col)) in record.iter().zip(columns.iter_mut()) {
                if field.is_empty() {
                    return Err(Error::Schema(format!(
                        "{source} row {row}: missing value in column '{name}'"
                    )));
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::Schema(format!(
                        "{source} row {row}: column '{name}' has non-numeric value '{field}'"
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Schema(format!(
                        "{source} row {row}: column '{name}' is not finite"
                    )));
                }
                col.push(v);
            }
            n_rows += 1;
        }
        Ok(Self { columns, n_rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_reader(file, &path.display().to_string())
    }

    fn take(&mut self, name: &str, source: &str) -> Result<Vec<f64>> {
        self.columns
            .shift_remove(name)
            .ok_or_else(|| Error::Schema(format!("{source}: required column '{name}' not found")))
    }

    fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }
}

/// Which CSV headers hold Z, X and Y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub z: String,
    pub x: String,
    pub y: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            z: "z".into(),
            x: "x".into(),
            y: "y".into(),
        }
    }
}

impl MainStudy {
    /// Build from a table. `covariates` lists the columns to keep; any other column is ignored.
    pub fn from_table(mut t: Table, map: &ColumnMap, covariates: &[String], source: &str) -> Result<Self> {
        if t.has(&map.x) {
            return Err(Error::Schema(format!(
                "{source}: main study must not contain the true exposure column '{}'",
                map.x
            )));
        }
        let z = t.take(&map.z, source)?;
        let y = t.take(&map.y, source)?;
        let mut covs = IndexMap::new();
        for c in covariates {
            covs.insert(c.clone(), t.take(c, source)?);
        }
        Ok(Self {
            z,
            y,
            covariates: covs,
        })
    }
}

impl ValidationStudy {
    /// Build from a table. Covariates missing from the validation file are skipped;
    /// the caller decides whether that is acceptable for its adjustment plan.
    pub fn from_table(mut t: Table, map: &ColumnMap, covariates: &[String], source: &str) -> Result<Self> {
        if t.has(&map.y) {
            return Err(Error::Schema(format!(
                "{source}: validation study must not contain the outcome column '{}'",
                map.y
            )));
        }
        let z = t.take(&map.z, source)?;
        let x = t.take(&map.x, source)?;
        let mut covs = IndexMap::new();
        for c in covariates {
            if let Some(col) = t.columns.shift_remove(c.as_str()) {
                covs.insert(c.clone(), col);
            }
        }
        Ok(Self {
            x,
            z,
            covariates: covs,
        })
    }
}

fn write_columns(path: &Path, cols: &[(&str, &[f64])]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(cols.iter().map(|(name, _)| *name))?;
    let n = cols.first().map_or(0, |(_, c)| c.len());
    let mut buf: Vec<String> = Vec::with_capacity(cols.len());
    for i in 0..n {
        buf.clear();
        // `{}` on f64 prints the shortest string that parses back to the same bits.
        buf.extend(cols.iter().map(|(_, c)| format!("{}", c[i])));
        w.write_record(&buf)?;
    }
    w.into_inner()
        .map_err(|e| io_err(e.into_error()))?
        .flush()
        .map_err(io_err)
}

impl MainStudy {
    pub fn write_csv(&self, path: &Path, map: &ColumnMap) -> Result<()> {
        let mut cols: Vec<(&str, &[f64])> = vec![(&map.z, &self.z), (&map.y, &self.y)];
        cols.extend(self.covariates.iter().map(|(k, v)| (k.as_str(), v.as_slice())));
        write_columns(path, &cols)
    }
}

impl ValidationStudy {
    pub fn write_csv(&self, path: &Path, map: &ColumnMap) -> Result<()> {
        let mut cols: Vec<(&str, &[f64])> = vec![(&map.x, &self.x), (&map.z, &self.z)];
        cols.extend(self.covariates.iter().map(|(k, v)| (k.as_str(), v.as_slice())));
        write_columns(path, &cols)
    }
}
