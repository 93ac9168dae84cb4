//! Role-tagged observation tables: CSV loading and writing, column access,
//! standardization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ConfigSpace, Configuration, OptionKind, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableRole {
    Option,
    #[serde(alias = "system_metric", alias = "metric")]
    SystemMetric,
    Objective,
    #[serde(alias = "constraint_metric", alias = "constraint")]
    ConstraintMetric,
    #[serde(alias = "success_flag", alias = "success")]
    SuccessFlag,
}

impl std::str::FromStr for VariableRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown role `{s}`")))
    }
}

pub type RoleMap = BTreeMap<String, VariableRole>;

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Float(Vec<f64>),
    Int(Vec<i64>),
    Level {
        levels: Vec<String>,
        codes: Vec<usize>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Float(v) => v.len(),
            ColumnData::Int(v) => v.len(),
            ColumnData::Level { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view; levels become their integer codes.
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            ColumnData::Float(v) => v.clone(),
            ColumnData::Int(v) => v.iter().map(|&x| x as f64).collect(),
            ColumnData::Level { codes, .. } => codes.iter().map(|&c| c as f64).collect(),
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            ColumnData::Float(v) => Value::Float(v[row]),
            ColumnData::Int(v) => Value::Int(v[row]),
            ColumnData::Level { codes, .. } => Value::Level(codes[row]),
        }
    }

    fn format(&self, row: usize) -> String {
        match self {
            ColumnData::Float(v) => format!("{}", v[row]),
            ColumnData::Int(v) => v[row].to_string(),
            ColumnData::Level { levels, codes } => levels[codes[row]].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub role: VariableRole,
    pub data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, role: VariableRole, data: ColumnData) -> Self {
        Column {
            name: name.into(),
            role,
            data,
        }
    }

    pub fn float(name: impl Into<String>, role: VariableRole, values: Vec<f64>) -> Self {
        Self::new(name, role, ColumnData::Float(values))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.data.len());
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        for c in &columns {
            if c.data.len() != rows {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has {} rows, expected {rows}",
                    c.name,
                    c.data.len()
                )));
            }
            if let ColumnData::Float(v) = &c.data {
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::BadRow {
                        row: i,
                        reason: format!("non-finite value in `{}`", c.name),
                    });
                }
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        Ok(Dataset { columns, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.get(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(name)?.data.as_f64())
    }

    pub fn role(&self, name: &str) -> Option<VariableRole> {
        self.get(name).map(|c| c.role)
    }

    pub fn names_with_role(&self, role: VariableRole) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Option assignments of one row, for the option columns present.
    pub fn configuration(&self, row: usize) -> Configuration {
        self.columns
            .iter()
            .filter(|c| c.role == VariableRole::Option)
            .map(|c| (c.name.clone(), c.data.value(row)))
            .collect()
    }

    /// Copy keeping only the named columns, in dataset order.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        for n in names {
            self.column(n)?;
        }
        Dataset::new(
            self.columns
                .iter()
                .filter(|c| names.contains(&c.name))
                .cloned()
                .collect(),
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for r in 0..self.rows {
            w.write_record(self.columns.iter().map(|c| c.data.format(r)))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Loads a CSV whose every column carries a role. Option columns are parsed
/// against `space`; everything else is numeric, with success flags in {0, 1}.
pub fn load_dataset(
    path: impl AsRef<Path>,
    space: &ConfigSpace,
    roles: &RoleMap,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    for name in roles.keys() {
        if !header.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }
    let mut col_roles = Vec::with_capacity(header.len());
    for name in &header {
        let role = *roles
            .get(name)
            .ok_or_else(|| Error::MissingRole(name.clone()))?;
        if role == VariableRole::Option && space.get(name).is_none() {
            return Err(Error::UnknownColumn(name.clone()));
        }
        col_roles.push(role);
    }

    let mut cells: Vec<Vec<Value>> = vec![Vec::new(); header.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::BadRow {
            row,
            reason: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::BadRow {
                row,
                reason: format!("{} fields, expected {}", rec.len(), header.len()),
            });
        }
        for (j, raw) in rec.iter().enumerate() {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(Error::BadRow {
                    row,
                    reason: format!("missing value in `{}`", header[j]),
                });
            }
            let v = match col_roles[j] {
                VariableRole::Option => {
                    space
                        .option(&header[j])?
                        .parse_value(raw)
                        .map_err(|e| Error::BadRow {
                            row,
                            reason: e.to_string(),
                        })?
                }
                VariableRole::SuccessFlag => match raw.parse::<f64>() {
                    Ok(x) if x == 0.0 || x == 1.0 => Value::Int(x as i64),
                    _ => {
                        return Err(Error::BadRow {
                            row,
                            reason: format!("success flag `{raw}` is not 0 or 1"),
                        })
                    }
                },
                _ => match raw.parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Float(x),
                    _ => {
                        return Err(Error::BadRow {
                            row,
                            reason: format!("`{raw}` in `{}` is not a number", header[j]),
                        })
                    }
                },
            };
            cells[j].push(v);
        }
    }
    if cells.first().is_none_or(|c| c.is_empty()) {
        return Err(Error::EmptyDataset);
    }

    let columns = header
        .iter()
        .zip(col_roles)
        .zip(cells)
        .map(|((name, role), vals)| {
            let data = match (role, space.get(name)) {
                (VariableRole::Option, Some(o)) => match o.kind() {
                    OptionKind::Continuous => {
                        ColumnData::Float(vals.iter().map(|v| v.as_f64()).collect())
                    }
                    OptionKind::Integer => ColumnData::Int(
                        vals.iter()
                            .map(|v| match v {
                                Value::Int(i) => *i,
                                _ => unreachable!("parsed as integer"),
                            })
                            .collect(),
                    ),
                    OptionKind::Boolean | OptionKind::Categorical => ColumnData::Level {
                        levels: o.levels().unwrap_or_default().to_vec(),
                        codes: vals.iter().map(|v| v.as_f64() as usize).collect(),
                    },
                },
                (VariableRole::SuccessFlag, _) => {
                    ColumnData::Int(vals.iter().map(|v| v.as_f64() as i64).collect())
                }
                _ => ColumnData::Float(vals.iter().map(|v| v.as_f64()).collect()),
            };
            Column::new(name.clone(), role, data)
        })
        .collect();
    Dataset::new(columns)
}

/// Sample mean and standard deviation (denominator n - 1).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-column (mean, sd) recorded by [`standardize`].
pub type Transform = BTreeMap<String, (f64, f64)>;

/// Z-scores the named columns. The result holds them as float columns.
pub fn standardize(ds: &Dataset, cols: &[String]) -> Result<(Dataset, Transform)> {
    let mut params = Transform::new();
    let mut out = ds.clone();
    for name in cols {
        let x = ds.numeric(name)?;
        let (m, s) = mean_sd(&x);
        if !(s > 0.0) {
            return Err(Error::ConstantColumn(name.clone()));
        }
        let col = out
            .columns
            .iter_mut()
            .find(|c| &c.name == name)
            .expect("checked above");
        col.data = ColumnData::Float(x.iter().map(|v| (v - m) / s).collect());
        params.insert(name.clone(), (m, s));
    }
    Ok((out, params))
}

pub fn unstandardize(ds: &Dataset, params: &Transform) -> Result<Dataset> {
    let mut out = ds.clone();
    for (name, (m, s)) in params {
        let x = ds.numeric(name)?;
        let col = out
            .columns
            .iter_mut()
            .find(|c| &c.name == name)
            .expect("numeric() found it");
        col.data = ColumnData::Float(x.iter().map(|v| v * s + m).collect());
    }
    Ok(out)
}
