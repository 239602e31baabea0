//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; lists are comma-separated.
//! Unknown or repeated keys are errors.

use crate::error::{CliError, Result};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SyntheticDenoise,
    SyntheticInterpolate,
    DatasetDenoise,
    DatasetInterpolate,
}

impl Experiment {
    pub fn is_dataset(self) -> bool {
        matches!(self, Self::DatasetDenoise | Self::DatasetInterpolate)
    }

    pub fn is_interpolation(self) -> bool {
        matches!(self, Self::SyntheticInterpolate | Self::DatasetInterpolate)
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synthetic-denoise" => Ok(Self::SyntheticDenoise),
            "synthetic-interpolate" => Ok(Self::SyntheticInterpolate),
            "dataset-denoise" => Ok(Self::DatasetDenoise),
            "dataset-interpolate" => Ok(Self::DatasetInterpolate),
            _ => Err(format!(
                "unknown experiment `{s}` (expected synthetic-denoise, synthetic-interpolate, dataset-denoise or dataset-interpolate)"
            )),
        }
    }
}

/// Reconstruction methods compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Node-invariant weight `ω0*`.
    NI,
    /// Random weights `√ω0* + ω0*·c_i`, `c_i ~ U[0,1]`.
    NaiveNA,
    PronyUnconstrained,
    Prony,
    SDR,
    MinMaxProny,
    MinMaxSDR,
    /// Kernel ridge regression with a diffusion kernel.
    KRR,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::NI,
        Method::NaiveNA,
        Method::PronyUnconstrained,
        Method::Prony,
        Method::SDR,
        Method::MinMaxProny,
        Method::MinMaxSDR,
        Method::KRR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::NI => "NI",
            Method::NaiveNA => "NaiveNA",
            Method::PronyUnconstrained => "PronyUnconstrained",
            Method::Prony => "Prony",
            Method::SDR => "SDR",
            Method::MinMaxProny => "MinMaxProny",
            Method::MinMaxSDR => "MinMaxSDR",
            Method::KRR => "KRR",
        }
    }

    pub fn is_minmax(self) -> bool {
        matches!(self, Method::MinMaxProny | Method::MinMaxSDR)
    }

    /// Needs a signal (or second-moment) prior.
    pub fn needs_signal_prior(self) -> bool {
        matches!(self, Method::PronyUnconstrained | Method::Prony | Method::SDR)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// How the relaxation designs learn the noise covariance on datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseEstimate {
    /// The injected `σ²I`, averaged over the evaluated snapshots.
    Known,
    /// Sample variance of a single noise draw on the first evaluated snapshot.
    SingleInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetMode {
    /// Design from the first half of the snapshots, evaluate on the second.
    DataDriven,
    /// Design from elementwise bounds over all snapshots, evaluate on all.
    MinMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Erdős–Rényi size and edge probability (synthetic experiments).
    pub n: usize,
    pub p: f64,
    /// Nearest neighbours and kernel scale (datasets).
    pub k: usize,
    pub kernel_scale: f64,
    pub bandwidth: usize,
    pub snr_grid_db: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub n_graphs: usize,
    pub n_noise: usize,
    pub graph_seed: u64,
    pub noise_seed: u64,
    pub w0_multiplier: f64,
    /// Reuse one observed subset per graph (or snapshot) and size.
    pub fixed_subset: bool,
    pub noise_estimate: NoiseEstimate,
    pub dataset_mode: DatasetMode,
    pub krr_sigma2: f64,
    pub krr_mu: f64,
    /// Relative tolerance of the design solver.
    pub sdp_tolerance: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, methods: Vec<Method>) -> Self {
        Self {
            experiment,
            n: 50,
            p: 0.5,
            k: 5,
            kernel_scale: 5.0,
            bandwidth: 20,
            snr_grid_db: vec![0.0],
            sample_sizes: Vec::new(),
            methods,
            n_graphs: 1,
            n_noise: 1,
            graph_seed: 1,
            noise_seed: 1_000_000,
            w0_multiplier: 1.0,
            fixed_subset: false,
            noise_estimate: NoiseEstimate::Known,
            dataset_mode: DatasetMode::DataDriven,
            krr_sigma2: 1.0,
            krr_mu: 1e-4,
            sdp_tolerance: 1e-7,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let distinct: BTreeSet<_> = self.methods.iter().collect();
        if distinct.len() != self.methods.len() {
            return bad("methods contain duplicates".into());
        }
        if self.n_graphs == 0 || self.n_noise == 0 {
            return bad("trial counts must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid_db must be a nonempty list of finite values".into());
        }
        let mut snrs = self.snr_grid_db.clone();
        snrs.sort_by(f64::total_cmp);
        snrs.dedup();
        let mut sizes = self.sample_sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        if snrs.len() != self.snr_grid_db.len() || sizes.len() != self.sample_sizes.len() {
            return bad("grids contain duplicates".into());
        }
        if self.experiment.is_interpolation() {
            if self.snr_grid_db.len() != 1 {
                return bad("interpolation experiments take a single SNR".into());
            }
            if self.sample_sizes.is_empty() {
                return bad("interpolation experiments need sample_sizes".into());
            }
            if self.sample_sizes.contains(&0) {
                return bad("sample sizes must be at least 1".into());
            }
        }
        if !(self.w0_multiplier > 0.0 && self.w0_multiplier.is_finite()) {
            return bad(format!("w0_multiplier {} must be positive", self.w0_multiplier));
        }
        if !(self.krr_sigma2 >= 0.0 && self.krr_mu > 0.0) {
            return bad("krr_sigma2 must be non-negative and krr_mu positive".into());
        }
        if !(self.sdp_tolerance > 0.0) {
            return bad("sdp_tolerance must be positive".into());
        }
        if self.experiment.is_dataset() {
            if self.k == 0 || !(self.kernel_scale > 0.0) {
                return bad("k and kernel_scale must be positive".into());
            }
            if self.dataset_mode == DatasetMode::MinMax {
                if let Some(m) = self.methods.iter().find(|m| m.needs_signal_prior()) {
                    return bad(format!("{m} needs training data and is unavailable in min-max mode"));
                }
            }
        } else {
            if self.n < 2 || !(self.p > 0.0 && self.p <= 1.0) {
                return bad("synthetic graphs need n ≥ 2 and p in (0, 1]".into());
            }
            if self.bandwidth == 0 || self.bandwidth > self.n {
                return bad(format!("bandwidth {} outside [1, {}]", self.bandwidth, self.n));
            }
            if let Some(m) = self.methods.iter().find(|m| m.is_minmax()) {
                return bad(format!("{m} needs signal bounds and only runs on datasets"));
            }
            if let Some(&m) = self.sample_sizes.iter().find(|&&m| m > self.n) {
                return bad(format!("sample size {m} exceeds n = {}", self.n));
            }
        }
        Ok(())
    }
}

/// `(line, key, value)` triples of a `key = value` file.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config { line: i + 1, message: format!("expected `key = value`, got `{line}`") })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| CliError::Config { line, message: format!("{key}: `{v}`: {e}") })
}

pub(crate) fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_value(line, key, x.trim())).collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config { line, message: format!("{key}: `{v}` is not a boolean") }),
    }
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self> {
        let entries = parse_key_values(text)?;
        let mut seen = BTreeSet::new();
        for (line, k, _) in &entries {
            if !seen.insert(k.as_str()) {
                return Err(CliError::Config { line: *line, message: format!("`{k}` given twice") });
            }
        }
        let find = |key: &str| entries.iter().find(|(_, k, _)| k == key);
        let (line, _, v) = find("experiment").ok_or_else(|| CliError::Invalid("missing `experiment`".into()))?;
        let experiment = parse_value(*line, "experiment", v)?;
        let mut cfg = ExperimentConfig::new(experiment, Vec::new());
        for (line, k, v) in &entries {
            let (line, v) = (*line, v.as_str());
            match k.as_str() {
                "experiment" => {}
                "n" => cfg.n = parse_value(line, k, v)?,
                "p" => cfg.p = parse_value(line, k, v)?,
                "k" => cfg.k = parse_value(line, k, v)?,
                "kernel_scale" => cfg.kernel_scale = parse_value(line, k, v)?,
                "bandwidth" => cfg.bandwidth = parse_value(line, k, v)?,
                "snr_grid_db" => cfg.snr_grid_db = parse_list(line, k, v)?,
                "sample_sizes" => cfg.sample_sizes = parse_list(line, k, v)?,
                "methods" => cfg.methods = parse_list(line, k, v)?,
                "n_graphs" => cfg.n_graphs = parse_value(line, k, v)?,
                "n_noise" => cfg.n_noise = parse_value(line, k, v)?,
                "graph_seed" => cfg.graph_seed = parse_value(line, k, v)?,
                "noise_seed" => cfg.noise_seed = parse_value(line, k, v)?,
                "w0_multiplier" => cfg.w0_multiplier = parse_value(line, k, v)?,
                "fixed_subset" => cfg.fixed_subset = parse_bool(line, k, v)?,
                "noise_estimate" => {
                    cfg.noise_estimate = match v {
                        "known" => NoiseEstimate::Known,
                        "single-instance" => NoiseEstimate::SingleInstance,
                        _ => return Err(CliError::Config { line, message: format!("noise_estimate: `{v}` (known | single-instance)") }),
                    }
                }
                "dataset_mode" => {
                    cfg.dataset_mode = match v {
                        "data-driven" => DatasetMode::DataDriven,
                        "min-max" => DatasetMode::MinMax,
                        _ => return Err(CliError::Config { line, message: format!("dataset_mode: `{v}` (data-driven | min-max)") }),
                    }
                }
                "krr_sigma2" => cfg.krr_sigma2 = parse_value(line, k, v)?,
                "krr_mu" => cfg.krr_mu = parse_value(line, k, v)?,
                "sdp_tolerance" => cfg.sdp_tolerance = parse_value(line, k, v)?,
                _ => return Err(CliError::Config { line, message: format!("unknown key `{k}`") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "# snr sweep\nexperiment = synthetic-denoise\nn = 30\nsnr_grid_db = -10, -5, 0\nmethods = NI, Prony\nn_graphs = 2 # trailing comment\n";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.n, 30);
        assert_eq!(cfg.snr_grid_db, vec![-10.0, -5.0, 0.0]);
        assert_eq!(cfg.methods, vec![Method::NI, Method::Prony]);
        assert_eq!(cfg.n_graphs, 2);
        assert_eq!(cfg.p, 0.5);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = "experiment = synthetic-denoise\nmethods = NI\nbandwith = 3\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, CliError::Config { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_invalid_settings() {
        for text in [
            "experiment = synthetic-denoise\nmethods = NI\nn_noise = 0\n",
            "experiment = synthetic-denoise\nmethods = NI\nsnr_grid_db =\n",
            "experiment = synthetic-denoise\nmethods = NI, NI\n",
            "experiment = synthetic-denoise\nmethods = MinMaxProny\n",
            "experiment = synthetic-interpolate\nmethods = NI\n",
            "experiment = synthetic-interpolate\nmethods = NI\nsample_sizes = 10, 60\n",
            "experiment = dataset-denoise\nmethods = Prony\ndataset_mode = min-max\n",
            "experiment = synthetic-denoise\nmethods = NI\nn = 4\nn = 5\n",
            "methods = NI\n",
        ] {
            assert!(text.parse::<ExperimentConfig>().is_err(), "{text}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
