//! CSV input: regression samples with declared column roles, and validation
//! pairs for the misclassification rates.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use labelboot::{DMatrix, DVector, Dataset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Column roles in a sample file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub outcome: String,
    /// Imputed label column, strictly 0/1.
    pub label: String,
    /// Numeric covariates, in design order. Include a constant column for an intercept.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Categorical columns expanded to indicators after the numeric covariates.
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    /// Latent label column, when known.
    #[serde(default)]
    pub true_label: Option<String>,
}

/// Omitted category of an expanded fixed effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseLevel {
    pub column: String,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    /// Names of the columns of `Z`, indicators named `column=level`.
    pub covariate_names: Vec<String>,
    /// Rows dropped for a missing required cell.
    pub dropped_rows: usize,
    pub base_levels: Vec<BaseLevel>,
    pub schema: Schema,
}

impl Ingested {
    /// Schema under which [`write_csv`] output re-ingests to the same dataset.
    pub fn flat_schema(&self) -> Schema {
        Schema {
            outcome: self.schema.outcome.clone(),
            label: self.schema.label.clone(),
            covariates: self.covariate_names.clone(),
            fixed_effects: Vec::new(),
            true_label: self.schema.true_label.clone(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "." | "NA" | "na" | "N/A" | "NaN" | "nan")
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table<R: Read>(reader: R, path: &Path) -> Result<Table> {
    let csv_err = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(CliError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let rows = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    Ok(Table { header, rows })
}

impl Table {
    fn column(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    }
}

fn parse_number(cell: &str, row: usize, column: &str, path: &Path) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| CliError::NonNumeric {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })
}

fn parse_binary(cell: &str, row: usize, column: &str, path: &Path) -> Result<bool> {
    match cell.parse::<f64>() {
        Ok(0.0) => Ok(false),
        Ok(1.0) => Ok(true),
        _ => Err(CliError::NonBinary {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Reads a sample file. Rows are numbered from 1 after the header in error
/// messages. Rows with an empty or `NA` cell in any role column are dropped.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file, path, schema)
}

/// As [`ingest_csv`], reading from any source; `path` only labels errors.
pub fn ingest_reader<R: Read>(reader: R, path: &Path, schema: &Schema) -> Result<Ingested> {
    let table = read_table(reader, path)?;
    let y_col = table.column(&schema.outcome, path)?;
    let label_col = table.column(&schema.label, path)?;
    let cov_cols = schema
        .covariates
        .iter()
        .map(|c| table.column(c, path))
        .collect::<Result<Vec<_>>>()?;
    let fe_cols = schema
        .fixed_effects
        .iter()
        .map(|c| table.column(c, path))
        .collect::<Result<Vec<_>>>()?;
    let true_col = schema
        .true_label
        .as_deref()
        .map(|c| table.column(c, path))
        .transpose()?;

    let required: Vec<usize> = [y_col, label_col]
        .into_iter()
        .chain(cov_cols.iter().copied())
        .chain(fe_cols.iter().copied())
        .chain(true_col)
        .collect();
    let kept: Vec<(usize, &csv::StringRecord)> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1, r))
        .filter(|(_, r)| {
            required
                .iter()
                .all(|&c| !is_missing(r.get(c).unwrap_or("")))
        })
        .collect();
    let dropped_rows = table.rows.len() - kept.len();
    if kept.is_empty() {
        return Err(CliError::NoRows {
            path: path.to_path_buf(),
        });
    }
    if dropped_rows > 0 {
        log::warn!(
            "{}: dropped {dropped_rows} rows with missing values",
            path.display()
        );
    }

    let mut y = Vec::with_capacity(kept.len());
    let mut theta_hat = Vec::with_capacity(kept.len());
    let mut theta_true = true_col.map(|_| Vec::with_capacity(kept.len()));
    let mut numeric = vec![Vec::with_capacity(kept.len()); cov_cols.len()];
    for &(row, rec) in &kept {
        y.push(parse_number(&rec[y_col], row, &schema.outcome, path)?);
        theta_hat.push(parse_binary(&rec[label_col], row, &schema.label, path)?);
        if let (Some(c), Some(t)) = (true_col, theta_true.as_mut()) {
            t.push(parse_binary(
                &rec[c],
                row,
                schema.true_label.as_deref().unwrap_or_default(),
                path,
            )?);
        }
        for ((&c, name), out) in cov_cols.iter().zip(&schema.covariates).zip(&mut numeric) {
            out.push(parse_number(&rec[c], row, name, path)?);
        }
    }

    let mut covariate_names = schema.covariates.clone();
    let mut base_levels = Vec::new();
    for (&c, name) in fe_cols.iter().zip(&schema.fixed_effects) {
        let levels: BTreeSet<&str> = kept.iter().map(|(_, r)| &r[c]).collect();
        let mut levels = levels.into_iter();
        let Some(base) = levels.next() else { continue };
        base_levels.push(BaseLevel {
            column: name.clone(),
            level: base.to_string(),
        });
        for level in levels {
            covariate_names.push(format!("{name}={level}"));
            numeric.push(
                kept.iter()
                    .map(|(_, r)| f64::from(u8::from(&r[c] == level)))
                    .collect(),
            );
        }
    }

    let n = kept.len();
    let z = DMatrix::from_fn(n, numeric.len(), |i, j| numeric[j][i]);
    let dataset = Dataset::new(DVector::from_vec(y), z, theta_hat, theta_true)?;
    Ok(Ingested {
        dataset,
        covariate_names,
        dropped_rows,
        base_levels,
        schema: schema.clone(),
    })
}

/// Writes a dataset with one column per role, in the order of `schema`.
/// Fixed effects must already be expanded into `schema.covariates`.
pub fn write_csv(path: impl AsRef<Path>, dataset: &Dataset, schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_dataset(file, path, dataset, schema)
}

pub fn write_dataset<W: Write>(
    writer: W,
    path: &Path,
    dataset: &Dataset,
    schema: &Schema,
) -> Result<()> {
    if !schema.fixed_effects.is_empty() {
        return Err(CliError::Config(
            "fixed effects must be expanded before writing".into(),
        ));
    }
    if schema.covariates.len() != dataset.z.ncols() {
        return Err(CliError::Config(format!(
            "{} covariate names for {} columns",
            schema.covariates.len(),
            dataset.z.ncols()
        )));
    }
    if schema.true_label.is_some() != dataset.theta_true.is_some() {
        return Err(CliError::Config(
            "true label column and dataset disagree".into(),
        ));
    }
    let csv_err = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let bit = |b: bool| if b { "1" } else { "0" }.to_string();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![schema.outcome.clone(), schema.label.clone()];
    header.extend(schema.covariates.iter().cloned());
    header.extend(schema.true_label.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.n() {
        let mut rec = vec![dataset.y[i].to_string(), bit(dataset.theta_hat[i])];
        rec.extend(dataset.z.row(i).iter().map(f64::to_string));
        if let Some(t) = &dataset.theta_true {
            rec.push(bit(t[i]));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads validation pairs `(θᵢ, θ̂ᵢ)` from columns `theta` and `theta_hat`,
/// or from the first two columns when those names are absent.
pub fn read_rate_pairs(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let table = read_table(file, path)?;
    let cols = match (table.column("theta", path), table.column("theta_hat", path)) {
        (Ok(a), Ok(b)) => (a, b),
        _ if table.header.len() >= 2 => (0, 1),
        _ => {
            return Err(CliError::MissingColumn {
                path: path.to_path_buf(),
                column: "theta_hat".into(),
            })
        }
    };
    let names = (table.header[cols.0].clone(), table.header[cols.1].clone());
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let get = |c: usize| rec.get(c).unwrap_or("");
            let truth = parse_binary(get(cols.0), i + 1, &names.0, path)?;
            let imputed = parse_binary(get(cols.1), i + 1, &names.1, path)?;
            Ok((f64::from(u8::from(truth)), f64::from(u8::from(imputed))))
        })
        .collect()
}
