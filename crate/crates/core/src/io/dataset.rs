//! Dataset files: UTF-8 CSV with header `t,n,y,<covariate names...>`.

use std::collections::HashMap;
use std::path::Path;

use log::info;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};

const INTERCEPT: &str = "intercept";

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Reads a dataset. When the first covariate column is not identically one,
/// an `intercept` column is inserted in front.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, path)
}

/// Parses dataset CSV from any reader; `path` is used in error messages.
pub fn read_dataset<R: std::io::Read>(reader: R, path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_error(path, 1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[..3] != ["t", "n", "y"] {
        return Err(parse_error(path, 1, "header must start with `t,n,y`"));
    }
    let mut covariates: Vec<String> = names[3..].iter().map(|s| s.to_string()).collect();
    let mut obs = Vec::new();
    let mut lines = Vec::new();
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let index = |i: usize, what: &str| -> Result<u32> {
            let v: u32 = record[i]
                .parse()
                .map_err(|_| parse_error(path, line, format!("{what} must be a nonnegative integer, got `{}`", &record[i])))?;
            Ok(v)
        };
        let (t, n, y) = (index(0, "t")?, index(1, "n")?, index(2, "y")?);
        if t == 0 || n == 0 {
            return Err(parse_error(path, line, "t and n are 1-based"));
        }
        if let Some(first) = seen.insert((t, n), line) {
            return Err(parse_error(path, line, format!("duplicate (t={t}, n={n}), first seen on line {first}")));
        }
        let x = record
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|_| parse_error(path, line, format!("covariate `{v}` is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(parse_error(path, line, "covariates must be finite"));
        }
        obs.push(Observation { t, n, y, x });
        lines.push(line);
    }
    let has_intercept = !covariates.is_empty() && obs.iter().all(|o| o.x[0] == 1.0);
    if !has_intercept {
        info!("{}: no constant first column; inserting `{INTERCEPT}`", path.display());
        covariates.insert(0, INTERCEPT.to_string());
        for o in &mut obs {
            o.x.insert(0, 1.0);
        }
    }
    Dataset::new(covariates, obs)
}

/// Writes a dataset; floats use the shortest representation that parses
/// back to the same value.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["t".to_string(), "n".to_string(), "y".to_string()];
    header.extend(data.covariate_names().iter().cloned());
    wtr.write_record(&header).map_err(csv_io)?;
    for o in data.observations() {
        let mut row = vec![o.t.to_string(), o.n.to_string(), o.y.to_string()];
        row.extend(o.x.iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
