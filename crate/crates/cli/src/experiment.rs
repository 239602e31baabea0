//! Monte-Carlo runners for the synthetic and dataset protocols.
//!
//! Every trial draws its randomness from its own seed (`noise_seed + t`,
//! graphs from `graph_seed + g`) in a fixed order (noise, naive weights,
//! observed subsets) that does not depend on the selected methods. Trials run
//! in parallel and are reduced in trial order, so the output is bitwise
//! reproducible.

use crate::config::{DatasetMode, Experiment, ExperimentConfig, Method, NoiseEstimate};
use crate::error::{CliError, Result};
use crate::table::ResultTable;
use gsr_core::analysis::optimal_w0;
use gsr_core::design::{
    design_minmax_prony, design_minmax_sdr, design_prony, design_prony_unconstrained, design_sdr, DesignProblem, Prior, SdpSolverConfig,
};
use gsr_core::estimators::{solve_direct, solve_interpolation, solve_krr_diffusion, SolveOptions};
use gsr_core::graph::{erdos_renyi, laplacian, Laplacian, NodeWeights};
use gsr_core::signal::{bandlimited_signal, load_station_csv, nmse, snr_to_sigma, GraphSignal, NoiseModel, Observation, SignalBounds};
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::Path;

/// Dispatches on `cfg.experiment`; dataset experiments need `data`.
pub fn run(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<ResultTable> {
    match cfg.experiment {
        Experiment::SyntheticDenoise => run_synthetic_denoise(cfg),
        Experiment::SyntheticInterpolate => run_synthetic_interpolate(cfg),
        Experiment::DatasetDenoise | Experiment::DatasetInterpolate => {
            let path = data.ok_or_else(|| CliError::Invalid("dataset experiments need a data file".into()))?;
            run_dataset(cfg, path)
        }
    }
}

pub fn run_synthetic_denoise(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::SyntheticDenoise)?;
    run_synthetic(cfg)
}

pub fn run_synthetic_interpolate(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::SyntheticInterpolate)?;
    run_synthetic(cfg)
}

fn expect(cfg: &ExperimentConfig, e: Experiment) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != e {
        return Err(CliError::Invalid(format!("config is for {:?}, not {e:?}", cfg.experiment)));
    }
    Ok(())
}

/// One NMSE sample: method, index into the x grid, value.
type Sample = (Method, usize, f64);

fn run_synthetic(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let units: Vec<Vec<Sample>> = (0..cfg.n_graphs)
        .into_par_iter()
        .map(|g| {
            let graph = erdos_renyi(cfg.n, cfg.p, cfg.graph_seed.wrapping_add(g as u64))?;
            let lap = laplacian(&graph);
            let x = bandlimited_signal(&lap, cfg.bandwidth, 0)?;
            let prior = Prior::ExactSignal(x.values.clone());
            let sigmas: Vec<f64> = cfg.snr_grid_db.iter().map(|&s| snr_to_sigma(&x, s)).collect::<gsr_core::Result<_>>()?;
            let setups = cfg
                .snr_grid_db
                .iter()
                .zip(&sigmas)
                .map(|(&snr, &sigma)| {
                    let w0 = optimal_w0(&lap, snr)? * cfg.w0_multiplier;
                    let designs = design_all(cfg, &lap, Some(&prior), None, w0, sigma * sigma)?;
                    Ok(Setup { w0, designs })
                })
                .collect::<Result<Vec<_>>>()?;
            let group = g * cfg.n_noise;
            let fixed = cfg.fixed_subset.then(|| fixed_masks(cfg.noise_seed, group, cfg.n, &cfg.sample_sizes));
            let mut out = Vec::new();
            for j in 0..cfg.n_noise {
                let draw = Draw::new(cfg.noise_seed, group + j, cfg.n, &cfg.sample_sizes);
                let masks = fixed.as_ref().unwrap_or(&draw.masks);
                for (si, (setup, &sigma)) in setups.iter().zip(&sigmas).enumerate() {
                    let y = &x.values + &draw.z * sigma;
                    evaluate(cfg, &lap, setup, &draw.c, &x, &y, masks, si, &mut out)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(reduce(cfg, units))
}

/// Data-driven mode designs from the first half of the snapshots and
/// evaluates on the second; min-max mode designs from elementwise bounds over
/// all snapshots and evaluates on all of them.
pub fn run_dataset(cfg: &ExperimentConfig, data_path: impl AsRef<Path>) -> Result<ResultTable> {
    cfg.validate()?;
    if !cfg.experiment.is_dataset() {
        return Err(CliError::Invalid(format!("config is for {:?}, not a dataset experiment", cfg.experiment)));
    }
    let data = load_station_csv(data_path, cfg.k, cfg.kernel_scale)?;
    let lap = laplacian(&data.graph);
    let n = lap.n();
    if let Some(&m) = cfg.sample_sizes.iter().find(|&&m| m > n) {
        return Err(CliError::Invalid(format!("sample size {m} exceeds the {n} stations")));
    }
    let t = data.signals.len();
    let (eval, prior) = match cfg.dataset_mode {
        DatasetMode::DataDriven => {
            if t < 2 {
                return Err(CliError::Invalid("data-driven mode needs at least two snapshots".into()));
            }
            let train = &data.signals[..t / 2];
            let x_bar = train.iter().fold(DMatrix::zeros(n, n), |acc, s| acc + &s.values * s.values.transpose()) / train.len() as f64;
            (&data.signals[t / 2..], Some(Prior::SignalOuterProduct(x_bar)))
        }
        DatasetMode::MinMax => (&data.signals[..], None),
    };
    let bounds = Prior::Bounds(SignalBounds::from_snapshots(&data.signals)?);

    // per-snapshot noise levels, one row per SNR
    let sigmas: Vec<Vec<f64>> = cfg
        .snr_grid_db
        .iter()
        .map(|&snr| eval.iter().map(|x| snr_to_sigma(x, snr)).collect::<gsr_core::Result<Vec<_>>>())
        .collect::<gsr_core::Result<_>>()?;
    let setups = cfg
        .snr_grid_db
        .par_iter()
        .zip(&sigmas)
        .map(|(&snr, sig)| {
            let w0 = optimal_w0(&lap, snr)? * cfg.w0_multiplier;
            let sigma2 = match cfg.noise_estimate {
                NoiseEstimate::Known => sig.iter().map(|s| s * s).sum::<f64>() / sig.len() as f64,
                NoiseEstimate::SingleInstance => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed ^ SINGLE_INSTANCE_SALT);
                    let z = NoiseModel::white(sig[0], 0).sample_with(n, &mut rng)?;
                    z.norm_squared() / n as f64
                }
            };
            let designs = design_all(cfg, &lap, prior.as_ref(), Some(&bounds), w0, sigma2)?;
            Ok(Setup { w0, designs })
        })
        .collect::<Result<Vec<_>>>()?;

    let units: Vec<Vec<Sample>> = (0..eval.len())
        .into_par_iter()
        .map(|e| {
            let x = &eval[e];
            let group = e * cfg.n_noise;
            let fixed = cfg.fixed_subset.then(|| fixed_masks(cfg.noise_seed, group, n, &cfg.sample_sizes));
            let mut out = Vec::new();
            for j in 0..cfg.n_noise {
                let draw = Draw::new(cfg.noise_seed, group + j, n, &cfg.sample_sizes);
                let masks = fixed.as_ref().unwrap_or(&draw.masks);
                for (si, setup) in setups.iter().enumerate() {
                    let y = &x.values + &draw.z * sigmas[si][e];
                    evaluate(cfg, &lap, setup, &draw.c, x, &y, masks, si, &mut out)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(reduce(cfg, units))
}

const SINGLE_INSTANCE_SALT: u64 = 0x5151_0e5e_ed00_0001;
const FIXED_SUBSET_SALT: u64 = 0x5151_0e5e_ed00_0002;

/// Floor `ω0` and designed weights for one SNR.
struct Setup {
    w0: f64,
    designs: Vec<(Method, NodeWeights)>,
}

fn design_all(
    cfg: &ExperimentConfig,
    lap: &Laplacian,
    signal: Option<&Prior>,
    bounds: Option<&Prior>,
    w0: f64,
    sigma2: f64,
) -> Result<Vec<(Method, NodeWeights)>> {
    let sdp = SdpSolverConfig { tolerance: cfg.sdp_tolerance, ..SdpSolverConfig::default() };
    let noise = NoiseModel::white(sigma2.sqrt(), 0);
    let problem = |prior: Option<&Prior>, m: Method| {
        let prior = prior.ok_or_else(|| CliError::Invalid(format!("{m} has no prior in this experiment")))?;
        Ok::<_, CliError>(DesignProblem::new(lap, prior.clone(), w0).with_noise(noise.clone()))
    };
    let mut out = Vec::new();
    for &m in &cfg.methods {
        let result = match m {
            Method::NI => {
                out.push((m, NodeWeights::Invariant(w0)));
                continue;
            }
            Method::NaiveNA | Method::KRR => continue,
            Method::PronyUnconstrained => design_prony_unconstrained(&problem(signal, m)?, &sdp)?,
            Method::Prony => design_prony(&problem(signal, m)?, &sdp)?,
            Method::SDR => design_sdr(&problem(signal, m)?, &sdp)?,
            Method::MinMaxProny => design_minmax_prony(&problem(bounds, m)?, &sdp)?,
            Method::MinMaxSDR => design_minmax_sdr(&problem(bounds, m)?, &sdp)?,
        };
        out.push((m, result.omega));
    }
    Ok(out)
}

/// Randomness of one trial, drawn in a fixed order.
struct Draw {
    /// Standard-normal noise direction, scaled by `σ` per SNR.
    z: DVector<f64>,
    /// `c_i ~ U[0,1]` for the naive weights.
    c: Vec<f64>,
    /// One observed subset per sample size.
    masks: Vec<Vec<usize>>,
}

impl Draw {
    fn new(seed: u64, trial: usize, n: usize, sizes: &[usize]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let z = NoiseModel::white(1.0, 0).sample_with(n, &mut rng).expect("unit white noise is valid");
        let c = (0..n).map(|_| rng.random::<f64>()).collect();
        let masks = draw_masks(&mut rng, n, sizes);
        Self { z, c, masks }
    }
}

fn draw_masks(rng: &mut ChaCha8Rng, n: usize, sizes: &[usize]) -> Vec<Vec<usize>> {
    sizes
        .iter()
        .map(|&m| {
            let mut v = rand::seq::index::sample(rng, n, m).into_vec();
            v.sort_unstable();
            v
        })
        .collect()
}

fn fixed_masks(seed: u64, group: usize, n: usize, sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(group as u64) ^ FIXED_SUBSET_SALT);
    draw_masks(&mut rng, n, sizes)
}

/// Runs every selected method on one noisy observation `y` and records the
/// NMSE, per sample size for interpolation.
#[allow(clippy::too_many_arguments)]
fn evaluate(
    cfg: &ExperimentConfig,
    lap: &Laplacian,
    setup: &Setup,
    c: &[f64],
    truth: &GraphSignal,
    y: &DVector<f64>,
    masks: &[Vec<usize>],
    snr_index: usize,
    out: &mut Vec<Sample>,
) -> Result<()> {
    let n = lap.n();
    let observations: Vec<(usize, Observation)> = if cfg.experiment.is_interpolation() {
        masks
            .iter()
            .enumerate()
            .map(|(i, m)| Ok((i, if m.len() == n { Observation::full(y.clone()) } else { Observation::masked(y.clone(), m)? })))
            .collect::<Result<_>>()?
    } else {
        vec![(snr_index, Observation::full(y.clone()))]
    };
    let opts = SolveOptions::default();
    for (xi, obs) in &observations {
        for &m in &cfg.methods {
            let report = match m {
                Method::KRR => solve_krr_diffusion(lap, obs, cfg.krr_sigma2, cfg.krr_mu)?,
                _ => {
                    let naive;
                    let w = match m {
                        Method::NaiveNA => {
                            let s = setup.w0.sqrt();
                            naive = NodeWeights::adaptive(&c.iter().map(|ci| s + setup.w0 * ci).collect::<Vec<_>>());
                            &naive
                        }
                        _ => &setup.designs.iter().find(|(d, _)| *d == m).expect("every weighted method is designed").1,
                    };
                    if obs.is_full() {
                        solve_direct(lap, w, obs)?
                    } else {
                        solve_interpolation(lap, w, obs, &opts)?
                    }
                }
            };
            out.push((m, *xi, nmse(&report.estimate, truth)?));
        }
    }
    Ok(())
}

fn reduce(cfg: &ExperimentConfig, units: Vec<Vec<Sample>>) -> ResultTable {
    let xs: Vec<f64> = if cfg.experiment.is_interpolation() {
        cfg.sample_sizes.iter().map(|&m| m as f64).collect()
    } else {
        cfg.snr_grid_db.clone()
    };
    let mut cells: HashMap<(Method, usize), Vec<f64>> = HashMap::new();
    for (m, xi, v) in units.into_iter().flatten() {
        cells.entry((m, xi)).or_default().push(v);
    }
    ResultTable::from_samples(cells.into_iter().map(|((m, xi), v)| (m, xs[xi], v)))
}
