//! Delimited text with a mandatory header row.

use std::path::Path;

use tl2_core::{Dataset, Role};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path, delimiter: u8) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.iter().all(String::is_empty) {
            return Err(CliError::Input(format!("{}: missing header row", path.display())));
        }
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
            })
            .collect::<CliResult<Vec<Vec<String>>>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("missing column `{name}`")))
    }

    /// Numeric value of row `r`, column `c`.
    pub fn number(&self, r: usize, c: usize) -> CliResult<f64> {
        let cell = &self.rows[r][c];
        cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            CliError::Input(format!("non-numeric value `{cell}` in column `{}`, data row {}", self.header[c], r + 1))
        })
    }

    pub fn numeric_column(&self, c: usize) -> CliResult<Vec<f64>> {
        (0..self.rows.len()).map(|r| self.number(r, c)).collect()
    }
}

/// Features and optional response read from a data file.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub features: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub response: Option<Vec<f64>>,
}

/// Every column except `response` is a feature, in header order.
pub fn read_design(path: &Path, response: &str, delimiter: u8) -> CliResult<Design> {
    let table = Table::read(path, delimiter)?;
    let resp = table.header.iter().position(|h| h == response);
    let feats: Vec<usize> = (0..table.header.len()).filter(|&c| Some(c) != resp).collect();
    if feats.is_empty() {
        return Err(CliError::Input(format!("{}: no feature columns", path.display())));
    }
    let points = (0..table.rows.len())
        .map(|r| feats.iter().map(|&c| table.number(r, c)).collect::<CliResult<Vec<f64>>>())
        .collect::<CliResult<Vec<_>>>()?;
    let response = resp.map(|c| table.numeric_column(c)).transpose()?;
    Ok(Design { features: feats.iter().map(|&c| table.header[c].clone()).collect(), points, response })
}

pub fn read_dataset(path: &Path, response: &str, delimiter: u8, role: Role) -> CliResult<Dataset> {
    let d = read_design(path, response, delimiter)?;
    let ys = d.response.ok_or_else(|| {
        CliError::Input(format!("{}: missing response column `{response}`", path.display()))
    })?;
    let dim = d.features.len();
    let xs: Vec<f64> = d.points.into_iter().flatten().collect();
    Dataset::from_columns(dim, role, xs, ys)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Header `x1..xd,<response>` and shortest round-trip floats.
pub fn dataset_text(data: &Dataset, features: Option<&[String]>, response: &str, delimiter: u8) -> String {
    let names: Vec<String> = match features {
        Some(f) => f.to_vec(),
        None => (1..=data.dim()).map(|j| format!("x{j}")).collect(),
    };
    let d = (delimiter as char).to_string();
    let mut out = names.join(&d);
    out.push_str(&d);
    out.push_str(response);
    out.push('\n');
    for (x, y) in data.iter() {
        for v in x {
            out.push_str(&format!("{v:?}{d}"));
        }
        out.push_str(&format!("{y:?}\n"));
    }
    out
}
