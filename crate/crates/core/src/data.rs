//! Long-format evaluation dataset: ingestion, validation, serialization.
//!
//! Every analysis in this crate consumes the same shape of data: one row per
//! scored observation, a numeric response column, factor columns (system,
//! test-item id, meta-parameter settings, ...) and optional continuous
//! covariate columns. Factor levels are compared as exact, case-sensitive
//! strings and collected in first-appearance order; row order is preserved.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Role assignment for the columns of an input table.
///
/// The sidecar JSON form is
/// `{"response": "...", "factors": [...], "covariates": [...], "object_of_interest": "..."}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ColumnSchema {
    pub response: String,
    pub factors: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Factor whose between-level variance counts as substantial (the test
    /// items). Defaults to the first factor when absent.
    #[serde(default)]
    pub object_of_interest: Option<String>,
}

impl ColumnSchema {
    pub fn new(response: impl Into<String>, factors: Vec<String>, covariates: Vec<String>) -> Self {
        ColumnSchema {
            response: response.into(),
            factors,
            covariates,
            object_of_interest: None,
        }
    }

    pub fn with_object(mut self, object: impl Into<String>) -> Self {
        self.object_of_interest = Some(object.into());
        self
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::Structural(
                "schema must declare at least one factor column".into(),
            ));
        }
        let mut seen = HashSet::new();
        for name in std::iter::once(&self.response)
            .chain(self.factors.iter())
            .chain(self.covariates.iter())
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if let Some(obj) = &self.object_of_interest {
            if !self.factors.contains(obj) {
                return Err(Error::UnknownFactor(obj.clone()));
            }
        }
        Ok(())
    }
}

/// One factor column: ordered level labels plus the per-row level index.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    levels: Vec<String>,
    codes: Vec<u32>,
}

impl Factor {
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == label).map(|i| i as u32)
    }
}

/// A single observation, materialized with its labels. Mostly useful for
/// inspection and tests; analyses work on the columnar representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub response: f64,
    pub factor_values: IndexMap<String, String>,
    pub covariate_values: IndexMap<String, f64>,
}

/// Immutable long-format dataset. Safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDataset {
    response_name: String,
    response: Vec<f64>,
    factors: IndexMap<String, Factor>,
    covariates: IndexMap<String, Vec<f64>>,
    object_of_interest: String,
}

/// Read a dataset from a comma-delimited CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<EvalDataset> {
    load_csv_delimited(path, schema, b',')
}

/// As [`load_csv`] with an explicit delimiter (`b'\t'` for TSV exports).
pub fn load_csv_delimited(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
    delimiter: u8,
) -> Result<EvalDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, delimiter)
}

/// Read a dataset from any reader producing CSV bytes.
pub fn read_csv(reader: impl Read, schema: &ColumnSchema, delimiter: u8) -> Result<EvalDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        let mut found = None;
        for (i, h) in headers.iter().enumerate() {
            if h == name {
                if found.is_some() {
                    return Err(Error::DuplicateColumn(name.to_string()));
                }
                found = Some(i);
            }
        }
        found.ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let response_idx = col_index(&schema.response)?;
    let factor_idx: Vec<usize> = schema
        .factors
        .iter()
        .map(|f| col_index(f))
        .collect::<Result<_>>()?;
    let covariate_idx: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let mut response = Vec::new();
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); schema.factors.len()];
    let mut level_lookup: Vec<HashMap<String, u32>> = vec![HashMap::new(); schema.factors.len()];
    let mut codes: Vec<Vec<u32>> = vec![Vec::new(); schema.factors.len()];
    let mut covariates: Vec<Vec<f64>> = vec![Vec::new(); schema.covariates.len()];

    let parse_number = |cell: &str, line: usize, column: &str| -> Result<f64> {
        let trimmed = cell.trim();
        if trimmed.is_empty() {
            return Err(Error::MissingValue {
                line,
                column: column.to_string(),
            });
        }
        let value: f64 = trimmed.parse().map_err(|_| Error::ParseCell {
            line,
            column: column.to_string(),
            value: cell.to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteValue {
                line,
                column: column.to_string(),
                value,
            });
        }
        Ok(value)
    };

    for (row_i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(row_i + 2);

        let cell = record.get(response_idx).unwrap_or("");
        response.push(parse_number(cell, line, &schema.response)?);

        for (fi, &ci) in factor_idx.iter().enumerate() {
            let label = record.get(ci).unwrap_or("");
            if label.is_empty() {
                return Err(Error::MissingValue {
                    line,
                    column: schema.factors[fi].clone(),
                });
            }
            let code = match level_lookup[fi].get(label) {
                Some(&c) => c,
                None => {
                    let c = levels[fi].len() as u32;
                    levels[fi].push(label.to_string());
                    level_lookup[fi].insert(label.to_string(), c);
                    c
                }
            };
            codes[fi].push(code);
        }

        for (vi, &ci) in covariate_idx.iter().enumerate() {
            let cell = record.get(ci).unwrap_or("");
            covariates[vi].push(parse_number(cell, line, &schema.covariates[vi])?);
        }
    }

    if response.is_empty() {
        return Err(Error::EmptyData);
    }

    let factors: IndexMap<String, Factor> = schema
        .factors
        .iter()
        .cloned()
        .zip(
            levels
                .into_iter()
                .zip(codes)
                .map(|(levels, codes)| Factor { levels, codes }),
        )
        .collect();
    let covariates: IndexMap<String, Vec<f64>> =
        schema.covariates.iter().cloned().zip(covariates).collect();
    let object = schema
        .object_of_interest
        .clone()
        .unwrap_or_else(|| schema.factors[0].clone());

    Ok(EvalDataset {
        response_name: schema.response.clone(),
        response,
        factors,
        covariates,
        object_of_interest: object,
    })
}

impl EvalDataset {
    /// Build a dataset directly from columns. `factors` supplies, per factor,
    /// the ordered level labels and the per-row level index.
    pub fn from_columns(
        response_name: impl Into<String>,
        response: Vec<f64>,
        factors: Vec<(String, Vec<String>, Vec<u32>)>,
        covariates: Vec<(String, Vec<f64>)>,
        object_of_interest: Option<String>,
    ) -> Result<EvalDataset> {
        let response_name = response_name.into();
        let n = response.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if factors.is_empty() {
            return Err(Error::Structural("at least one factor is required".into()));
        }
        for (i, v) in response.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    line: i + 1,
                    column: response_name.clone(),
                    value: *v,
                });
            }
        }
        let mut names = HashSet::new();
        names.insert(response_name.clone());
        let mut factor_map = IndexMap::new();
        for (name, levels, codes) in factors {
            if !names.insert(name.clone()) {
                return Err(Error::DuplicateColumn(name));
            }
            if codes.len() != n {
                return Err(Error::Structural(format!(
                    "factor `{name}` has {} codes for {} rows",
                    codes.len(),
                    n
                )));
            }
            if levels.is_empty() {
                return Err(Error::Structural(format!("factor `{name}` has no levels")));
            }
            if levels.iter().collect::<HashSet<_>>().len() != levels.len() {
                return Err(Error::Structural(format!(
                    "factor `{name}` has duplicate level labels"
                )));
            }
            if let Some(bad) = codes.iter().find(|&&c| c as usize >= levels.len()) {
                return Err(Error::Structural(format!(
                    "factor `{name}` has code {bad} but only {} levels",
                    levels.len()
                )));
            }
            factor_map.insert(name, Factor { levels, codes });
        }
        let mut covariate_map = IndexMap::new();
        for (name, values) in covariates {
            if !names.insert(name.clone()) {
                return Err(Error::DuplicateColumn(name));
            }
            if values.len() != n {
                return Err(Error::Structural(format!(
                    "covariate `{name}` has {} values for {} rows",
                    values.len(),
                    n
                )));
            }
            if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    line: i + 1,
                    column: name.clone(),
                    value: *v,
                });
            }
            covariate_map.insert(name, values);
        }
        let object = match object_of_interest {
            Some(o) => {
                if !factor_map.contains_key(&o) {
                    return Err(Error::UnknownFactor(o));
                }
                o
            }
            None => factor_map.keys().next().unwrap().clone(),
        };
        Ok(EvalDataset {
            response_name,
            response,
            factors: factor_map,
            covariates: covariate_map,
            object_of_interest: object,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn factor_names(&self) -> impl Iterator<Item = &str> {
        self.factors.keys().map(|s| s.as_str())
    }

    pub fn factor(&self, name: &str) -> Result<&Factor> {
        self.factors
            .get(name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    pub fn has_factor(&self, name: &str) -> bool {
        self.factors.contains_key(name)
    }

    /// Map factor-name to its ordered level labels.
    pub fn factor_levels(&self) -> IndexMap<String, Vec<String>> {
        self.factors
            .iter()
            .map(|(k, v)| (k.clone(), v.levels.clone()))
            .collect()
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.keys().map(|s| s.as_str())
    }

    pub fn covariate(&self, name: &str) -> Result<&[f64]> {
        self.covariates
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownCovariate(name.to_string()))
    }

    pub fn has_covariate(&self, name: &str) -> bool {
        self.covariates.contains_key(name)
    }

    pub fn object_of_interest(&self) -> &str {
        &self.object_of_interest
    }

    pub fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            response: self.response_name.clone(),
            factors: self.factors.keys().cloned().collect(),
            covariates: self.covariates.keys().cloned().collect(),
            object_of_interest: Some(self.object_of_interest.clone()),
        }
    }

    /// Materialize row `i` with its labels.
    pub fn row(&self, i: usize) -> Observation {
        Observation {
            response: self.response[i],
            factor_values: self
                .factors
                .iter()
                .map(|(k, f)| (k.clone(), f.levels[f.codes[i] as usize].clone()))
                .collect(),
            covariate_values: self
                .covariates
                .iter()
                .map(|(k, v)| (k.clone(), v[i]))
                .collect(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Observation> + '_ {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    /// New dataset containing the given rows (in the given order). Level
    /// declarations are kept even for levels that no longer appear, so the
    /// coding of downstream design matrices is unchanged by filtering.
    pub fn select_rows(&self, indices: &[usize]) -> Result<EvalDataset> {
        if indices.is_empty() {
            return Err(Error::EmptyData);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_rows()) {
            return Err(Error::Structural(format!(
                "row index {bad} out of range ({} rows)",
                self.n_rows()
            )));
        }
        Ok(EvalDataset {
            response_name: self.response_name.clone(),
            response: indices.iter().map(|&i| self.response[i]).collect(),
            factors: self
                .factors
                .iter()
                .map(|(k, f)| {
                    (
                        k.clone(),
                        Factor {
                            levels: f.levels.clone(),
                            codes: indices.iter().map(|&i| f.codes[i]).collect(),
                        },
                    )
                })
                .collect(),
            covariates: self
                .covariates
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i]).collect()))
                .collect(),
            object_of_interest: self.object_of_interest.clone(),
        })
    }

    /// Apply `f` to every response value.
    pub fn map_response(&self, f: impl Fn(f64) -> f64) -> Result<EvalDataset> {
        let mut out = self.clone();
        out.response = self.response.iter().map(|&y| f(y)).collect();
        if let Some((i, v)) = out.response.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                line: i + 1,
                column: out.response_name.clone(),
                value: *v,
            });
        }
        Ok(out)
    }

    /// Add a covariate column; errors if the name is taken.
    pub fn with_covariate(&self, name: impl Into<String>, values: Vec<f64>) -> Result<EvalDataset> {
        let name = name.into();
        if self.covariates.contains_key(&name)
            || self.factors.contains_key(&name)
            || name == self.response_name
        {
            return Err(Error::CovariateExists(name));
        }
        if values.len() != self.n_rows() {
            return Err(Error::Structural(format!(
                "covariate `{name}` has {} values for {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                line: i + 1,
                column: name,
                value: *v,
            });
        }
        let mut out = self.clone();
        out.covariates.insert(name, values);
        Ok(out)
    }

    /// Replace the values of an existing covariate.
    pub fn replace_covariate(&self, name: &str, values: Vec<f64>) -> Result<EvalDataset> {
        if !self.covariates.contains_key(name) {
            return Err(Error::UnknownCovariate(name.to_string()));
        }
        if values.len() != self.n_rows() {
            return Err(Error::Structural(format!(
                "covariate `{name}` has {} values for {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        let mut out = self.clone();
        out.covariates.insert(name.to_string(), values);
        Ok(out)
    }

    /// Write the dataset as CSV: response first, then factors and covariates
    /// in declaration order. Numbers use the shortest round-tripping form,
    /// so load(write(ds)) reproduces `ds` exactly.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![self.response_name.clone()];
        header.extend(self.factors.keys().cloned());
        header.extend(self.covariates.keys().cloned());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut record = Vec::with_capacity(header.len());
            record.push(format!("{}", self.response[i]));
            for f in self.factors.values() {
                record.push(f.levels[f.codes[i] as usize].clone());
            }
            for v in self.covariates.values() {
                record.push(format!("{}", v[i]));
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Stable content hash over schema, level declarations, and all rows.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.response_name.as_bytes());
        hasher.update([0]);
        hasher.update(self.object_of_interest.as_bytes());
        hasher.update([0]);
        for (name, f) in &self.factors {
            hasher.update(name.as_bytes());
            for l in &f.levels {
                hasher.update([1]);
                hasher.update(l.as_bytes());
            }
            hasher.update([0]);
        }
        for name in self.covariates.keys() {
            hasher.update(name.as_bytes());
            hasher.update([0]);
        }
        for i in 0..self.n_rows() {
            hasher.update(self.response[i].to_le_bytes());
            for f in self.factors.values() {
                hasher.update(f.codes[i].to_le_bytes());
            }
            for v in self.covariates.values() {
                hasher.update(v[i].to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Report, for each pair of the named factors, the fraction of level
    /// combinations that actually occur. Unbalanced data is reported, never
    /// rejected.
    pub fn validate_crossing(&self, factors: &[String]) -> Result<CrossingReport> {
        for name in factors {
            if !self.factors.contains_key(name) {
                return Err(Error::UnknownFactor(name.clone()));
            }
        }
        let mut pairs = Vec::new();
        for i in 0..factors.len() {
            for j in (i + 1)..factors.len() {
                let fa = &self.factors[&factors[i]];
                let fb = &self.factors[&factors[j]];
                let mut seen = HashSet::new();
                for r in 0..self.n_rows() {
                    seen.insert((fa.codes[r], fb.codes[r]));
                }
                let total = fa.n_levels() * fb.n_levels();
                pairs.push(PairCrossing {
                    factor_a: factors[i].clone(),
                    factor_b: factors[j].clone(),
                    observed_cells: seen.len(),
                    total_cells: total,
                    fraction: seen.len() as f64 / total as f64,
                });
            }
        }
        Ok(CrossingReport { pairs })
    }
}

/// Observed fraction of the level grid for one factor pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairCrossing {
    pub factor_a: String,
    pub factor_b: String,
    pub observed_cells: usize,
    pub total_cells: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CrossingReport {
    pub pairs: Vec<PairCrossing>,
}

impl CrossingReport {
    pub fn fraction(&self, a: &str, b: &str) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| {
                (p.factor_a == a && p.factor_b == b) || (p.factor_a == b && p.factor_b == a)
            })
            .map(|p| p.fraction)
    }
}
