use crate::config::Method;
use crate::error::{CliError, Result};
use std::path::Path;

pub const HEADER: [&str; 5] = ["method", "x_value", "mean_nmse", "std_nmse", "n_trials"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    /// SNR in dB for denoising, number of observed nodes for interpolation.
    pub x_value: f64,
    pub mean_nmse: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std_nmse: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Aggregates per-trial NMSE values, summed in the given order.
    pub fn from_samples(samples: impl IntoIterator<Item = (Method, f64, Vec<f64>)>) -> Self {
        let rows = samples
            .into_iter()
            .map(|(method, x_value, v)| {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = if v.len() > 1 { (v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
                ResultRow { method, x_value, mean_nmse: mean, std_nmse: std, n_trials: v.len() }
            })
            .collect();
        let mut t = Self { rows };
        t.sort();
        t
    }

    /// Method name, then `x_value` ascending.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.method.name().cmp(b.method.name()).then(a.x_value.total_cmp(&b.x_value)));
    }

    pub fn get(&self, method: Method, x_value: f64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method && r.x_value == x_value)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut sorted = self.clone();
        sorted.sort();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &sorted.rows {
            w.write_record([
                r.method.name().to_string(),
                r.x_value.to_string(),
                r.mean_nmse.to_string(),
                r.std_nmse.to_string(),
                r.n_trials.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, table.to_csv_string()?)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<ResultTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(HEADER) {
        return Err(CliError::Table(format!("header must be `{}`", HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| field(i).parse::<f64>().map_err(|e| CliError::Table(format!("`{}`: {e}", field(i))));
        let mean_nmse = num(2)?;
        if !(mean_nmse >= 0.0) {
            return Err(CliError::Table(format!("negative mean NMSE {mean_nmse}")));
        }
        rows.push(ResultRow {
            method: field(0).parse().map_err(CliError::Table)?,
            x_value: num(1)?,
            mean_nmse,
            std_nmse: num(3)?,
            n_trials: field(4).parse().map_err(|e| CliError::Table(format!("`{}`: {e}", field(4))))?,
        });
    }
    Ok(ResultTable { rows })
}
