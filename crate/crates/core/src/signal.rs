//! Graph signals, noise, observations, metrics and station-data ingestion.

use crate::error::{check_len, GsrError, Result};
use crate::graph::{knn_geometric, Graph, Laplacian};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    pub values: DVector<f64>,
    pub node_ids: Option<Vec<String>>,
}

impl GraphSignal {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GsrError::InvalidInput("signal has non-finite entries".into()));
        }
        Ok(Self { values, node_ids: None })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `σ²·I`
    Scalar(f64),
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

/// Zero-mean Gaussian noise `N(0, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub covariance: Covariance,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn white(sigma: f64, rng_seed: u64) -> Self {
        Self { covariance: Covariance::Scalar(sigma * sigma), rng_seed }
    }

    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        match &self.covariance {
            Covariance::Scalar(s2) => DMatrix::identity(n, n) * *s2,
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
            Covariance::Full(m) => m.clone(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match &self.covariance {
            Covariance::Scalar(s2) => {
                if !(*s2 >= 0.0 && s2.is_finite()) {
                    return Err(GsrError::NotPositiveSemidefinite { min_eigenvalue: *s2 });
                }
            }
            Covariance::Diagonal(d) => {
                check_len("noise covariance", n, d.len())?;
                if let Some(&m) = d.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(GsrError::NotPositiveSemidefinite { min_eigenvalue: m });
                }
            }
            Covariance::Full(m) => {
                check_len("noise covariance", n, m.nrows())?;
                check_len("noise covariance", n, m.ncols())?;
                if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                    return Err(GsrError::InvalidInput("noise covariance is not symmetric".into()));
                }
                let ev = SymmetricEigen::new(m.clone()).eigenvalues;
                let (lo, hi) = (ev.min(), ev.amax());
                if lo < -1e-12 * hi.max(1.0) {
                    return Err(GsrError::NotPositiveSemidefinite { min_eigenvalue: lo });
                }
            }
        }
        Ok(())
    }

    /// One noise vector drawn from `rng`.
    pub fn sample_with(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        self.validate(n)?;
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(match &self.covariance {
            Covariance::Scalar(s2) => z * s2.sqrt(),
            Covariance::Diagonal(d) => z.zip_map(d, |zi, di| zi * di.sqrt()),
            Covariance::Full(m) => {
                let eig = SymmetricEigen::new(m.clone());
                let scaled = z.zip_map(&eig.eigenvalues, |zi, l| zi * l.max(0.0).sqrt());
                &eig.eigenvectors * scaled
            }
        })
    }
}

/// Measurements `y` on the observed node set `mask`. Entries of `y` outside
/// the mask are stored as zero and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: DVector<f64>,
    mask: Vec<usize>,
}

impl Observation {
    pub fn full(y: DVector<f64>) -> Self {
        let mask = (0..y.len()).collect();
        Self { y, mask }
    }

    pub fn masked(y: DVector<f64>, mask: &[usize]) -> Result<Self> {
        let n = y.len();
        let mut m = mask.to_vec();
        m.sort_unstable();
        m.dedup();
        if m.is_empty() {
            return Err(GsrError::InvalidInput("observation mask is empty".into()));
        }
        if m.len() != mask.len() {
            return Err(GsrError::InvalidInput("observation mask has repeated nodes".into()));
        }
        if let Some(&bad) = m.iter().find(|&&i| i >= n) {
            return Err(GsrError::InvalidInput(format!("mask node {bad} out of range")));
        }
        let mut y0 = DVector::zeros(n);
        for &i in &m {
            y0[i] = y[i];
        }
        Ok(Self { y: y0, mask: m })
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.mask.len() == self.y.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl SignalBounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_len("signal bounds", lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(GsrError::InvalidInput("lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Elementwise minimum and maximum over snapshots.
    pub fn from_snapshots(signals: &[GraphSignal]) -> Result<Self> {
        let first = signals.first().ok_or_else(|| GsrError::InvalidInput("no snapshots".into()))?;
        let mut lower = first.values.clone();
        let mut upper = first.values.clone();
        for s in &signals[1..] {
            check_len("snapshot", lower.len(), s.len())?;
            lower = lower.zip_map(&s.values, f64::min);
            upper = upper.zip_map(&s.values, f64::max);
        }
        Self::new(lower, upper)
    }
}

/// `U_{:,1..K}·1`: unit GFT coefficients on the `K` lowest frequencies.
pub fn bandlimited_signal(lap: &Laplacian, bandwidth: usize, _rng_seed: u64) -> Result<GraphSignal> {
    let u = lap.eigenvectors()?;
    check_bandwidth(bandwidth, u.ncols())?;
    GraphSignal::new(u.columns(0, bandwidth).column_sum())
}

/// Like [`bandlimited_signal`] with standard-normal GFT coefficients.
pub fn bandlimited_signal_random(lap: &Laplacian, bandwidth: usize, rng_seed: u64) -> Result<GraphSignal> {
    let u = lap.eigenvectors()?;
    check_bandwidth(bandwidth, u.ncols())?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let c = DVector::from_fn(bandwidth, |_, _| rng.sample::<f64, _>(StandardNormal));
    GraphSignal::new(u.columns(0, bandwidth) * c)
}

fn check_bandwidth(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(GsrError::InvalidInput(format!("bandwidth {k} outside [1, {n}]")));
    }
    Ok(())
}

/// `y = x + n`, `n ~ N(0, Σ)` drawn from the model's seed.
pub fn add_noise(x: &GraphSignal, model: &NoiseModel) -> Result<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    let noise = model.sample_with(x.len(), &mut rng)?;
    Ok(Observation::full(&x.values + noise))
}

/// Noise standard deviation giving `‖x‖²/(N·σ²)` equal to `snr_db`.
pub fn snr_to_sigma(x: &GraphSignal, snr_db: f64) -> Result<f64> {
    let energy = x.values.norm_squared();
    if energy == 0.0 {
        return Err(GsrError::ZeroSignal);
    }
    Ok((energy / (x.len() as f64 * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// `‖x̂ − x*‖² / ‖x*‖²`.
pub fn nmse(estimate: &GraphSignal, truth: &GraphSignal) -> Result<f64> {
    check_len("estimate", truth.len(), estimate.len())?;
    let energy = truth.values.norm_squared();
    if energy == 0.0 {
        return Err(GsrError::ZeroSignal);
    }
    Ok((&estimate.values - &truth.values).norm_squared() / energy)
}

/// Parsed station dataset: kNN graph over station coordinates and one
/// globally de-meaned signal per timestamp.
#[derive(Debug, Clone)]
pub struct StationData {
    pub graph: Graph,
    pub station_ids: Vec<String>,
    pub timestamps: Vec<String>,
    pub signals: Vec<GraphSignal>,
    /// Scalar removed from every entry.
    pub mean: f64,
}

pub fn load_station_csv(path: impl AsRef<Path>, k: usize, kernel_scale: f64) -> Result<StationData> {
    parse_station_csv(&std::fs::read_to_string(path)?, k, kernel_scale)
}

/// Two comma-separated blocks separated by a blank line:
/// `station_id,lat,lon` rows, then `timestamp,<id1>,<id2>,…` rows.
pub fn parse_station_csv(text: &str, k: usize, kernel_scale: f64) -> Result<StationData> {
    let lines: Vec<&str> = text.lines().collect();
    let split = lines
        .iter()
        .position(|l| l.trim().is_empty())
        .ok_or(GsrError::Parse { line: lines.len(), message: "missing blank line between blocks".into() })?;
    let coord_block = lines[..split].join("\n");
    let data_start = split
        + lines[split..]
            .iter()
            .position(|l| !l.trim().is_empty())
            .ok_or(GsrError::Parse { line: lines.len(), message: "missing measurement block".into() })?;
    let data_block = lines[data_start..].join("\n");

    let mut station_ids = Vec::new();
    let mut coords = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(coord_block.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["station_id", "lat", "lon"] {
        return Err(GsrError::Parse { line: 1, message: format!("expected `station_id,lat,lon`, got `{}`", header.join(",")) });
    }
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .filter(|v| !v.is_empty())
                .ok_or(GsrError::Parse { line, message: "missing coordinate".into() })?
                .parse::<f64>()
                .map_err(|e| GsrError::Parse { line, message: e.to_string() })
        };
        station_ids.push(rec.get(0).unwrap_or_default().to_string());
        coords.push(vec![num(1)?, num(2)?]);
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data_block.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let data_line0 = data_start + 1;
    if header.first().map(String::as_str) != Some("timestamp") {
        return Err(GsrError::Parse { line: data_line0, message: "measurement block must start with `timestamp`".into() });
    }
    let columns = &header[1..];
    // node order follows the coordinate block
    let mut col_of_node = Vec::with_capacity(station_ids.len());
    for id in &station_ids {
        let c = columns
            .iter()
            .position(|c| c == id)
            .ok_or(GsrError::Parse { line: data_line0, message: format!("no measurements for station `{id}`") })?;
        col_of_node.push(c + 1);
    }
    if let Some(extra) = columns.iter().find(|c| !station_ids.contains(c)) {
        return Err(GsrError::Parse { line: data_line0, message: format!("station `{extra}` has no coordinates") });
    }
    let mut timestamps = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = data_line0 + r + 1;
        let mut v = Vec::with_capacity(col_of_node.len());
        for &c in &col_of_node {
            let cell = rec.get(c).filter(|s| !s.is_empty()).ok_or(GsrError::Parse { line, message: "missing value".into() })?;
            let x = cell.parse::<f64>().map_err(|e| GsrError::Parse { line, message: e.to_string() })?;
            if !x.is_finite() {
                return Err(GsrError::Parse { line, message: "missing value".into() });
            }
            v.push(x);
        }
        timestamps.push(rec.get(0).unwrap_or_default().to_string());
        rows.push(v);
    }
    if rows.is_empty() {
        return Err(GsrError::Parse { line: data_line0, message: "no measurements".into() });
    }
    let count = (rows.len() * station_ids.len()) as f64;
    let mean = rows.iter().flatten().sum::<f64>() / count;
    let signals = rows
        .into_iter()
        .map(|v| {
            let mut s = GraphSignal::new(DVector::from_iterator(v.len(), v.into_iter().map(|x| x - mean)))?;
            s.node_ids = Some(station_ids.clone());
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = knn_geometric(&coords, k, kernel_scale)?;
    Ok(StationData { graph, station_ids, timestamps, signals, mean })
}

/// Writes the format read by [`parse_station_csv`].
pub fn write_station_csv(
    path: impl AsRef<Path>,
    ids: &[String],
    coords: &[(f64, f64)],
    timestamps: &[String],
    values: &[Vec<f64>],
) -> Result<()> {
    check_len("station coordinates", ids.len(), coords.len())?;
    check_len("timestamps", timestamps.len(), values.len())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["station_id", "lat", "lon"])?;
    for (id, (lat, lon)) in ids.iter().zip(coords) {
        w.write_record([id.clone(), lat.to_string(), lon.to_string()])?;
    }
    let mut text = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8");
    text.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("timestamp".to_string()).chain(ids.iter().cloned()))?;
    for (t, row) in timestamps.iter().zip(values) {
        check_len("measurement row", ids.len(), row.len())?;
        w.write_record(std::iter::once(t.clone()).chain(row.iter().map(f64::to_string)))?;
    }
    text.push_str(&String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"));
    std::fs::write(path, text)?;
    Ok(())
}
