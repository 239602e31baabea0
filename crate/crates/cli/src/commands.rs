//! Library side of the `gsr design` and `gsr check` subcommands.

use crate::config::{parse_key_values, parse_list, parse_value};
use crate::error::{CliError, Result};
use gsr_core::analysis::{check_corollary1, check_lemma1, check_theorem1, optimal_w0, theorem_quantities};
use gsr_core::design::{design_minmax_prony, design_minmax_sdr, design_prony, design_sdr, DesignProblem, DesignResult, Prior, SdpSolverConfig};
use gsr_core::graph::Laplacian;
use gsr_core::signal::{GraphSignal, NoiseModel, SignalBounds};
use nalgebra::DVector;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMethod {
    Prony,
    Sdr,
    MinMaxProny,
    MinMaxSdr,
}

impl FromStr for DesignMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "prony" => Ok(Self::Prony),
            "sdr" => Ok(Self::Sdr),
            "minmax-prony" => Ok(Self::MinMaxProny),
            "minmax-sdr" => Ok(Self::MinMaxSdr),
            _ => Err(format!("unknown design method `{s}` (prony | sdr | minmax-prony | minmax-sdr)")),
        }
    }
}

/// Parsed prior file.
///
/// ```text
/// signal = 0.1, 0.4, …        # or: lower = …  and  upper = …
/// candidate = …               # optional, repeatable (min-max only)
/// w0 = 0.05                   # or: snr_db = 0  (uses ω0*)
/// sigma = 0.3                 # noise standard deviation, relaxation designs
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub prior: Prior,
    pub w0: f64,
    pub sigma: Option<f64>,
    pub candidates: Vec<DVector<f64>>,
}

pub fn parse_prior(text: &str, lap: &Laplacian) -> Result<PriorSpec> {
    let (mut signal, mut lower, mut upper, mut w0, mut snr, mut sigma) = (None, None, None, None, None, None);
    let mut candidates = Vec::new();
    for (line, k, v) in parse_key_values(text)? {
        let vector = || parse_list::<f64>(line, &k, &v).map(DVector::from_vec);
        let slot = match k.as_str() {
            "signal" => &mut signal,
            "lower" => &mut lower,
            "upper" => &mut upper,
            "candidate" => {
                candidates.push(vector()?);
                continue;
            }
            "w0" => {
                w0 = Some(parse_value::<f64>(line, &k, &v)?);
                continue;
            }
            "snr_db" => {
                snr = Some(parse_value::<f64>(line, &k, &v)?);
                continue;
            }
            "sigma" => {
                sigma = Some(parse_value::<f64>(line, &k, &v)?);
                continue;
            }
            _ => return Err(CliError::Config { line, message: format!("unknown key `{k}`") }),
        };
        if slot.is_some() {
            return Err(CliError::Config { line, message: format!("`{k}` given twice") });
        }
        *slot = Some(vector()?);
    }
    let prior = match (signal, lower, upper) {
        (Some(x), None, None) => Prior::ExactSignal(x),
        (None, Some(l), Some(u)) => Prior::Bounds(SignalBounds::new(l, u)?),
        _ => return Err(CliError::Invalid("prior needs either `signal` or both `lower` and `upper`".into())),
    };
    let w0 = match (w0, snr) {
        (Some(w), None) => w,
        (None, Some(s)) => optimal_w0(lap, s)?,
        _ => return Err(CliError::Invalid("prior needs exactly one of `w0` and `snr_db`".into())),
    };
    Ok(PriorSpec { prior, w0, sigma, candidates })
}

pub fn design(lap: &Laplacian, spec: &PriorSpec, method: DesignMethod, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    let mut problem = DesignProblem::new(lap, spec.prior.clone(), spec.w0);
    problem.extra_candidates = spec.candidates.clone();
    if let Some(s) = spec.sigma {
        problem = problem.with_noise(NoiseModel::white(s, 0));
    }
    Ok(match method {
        DesignMethod::Prony => design_prony(&problem, cfg)?,
        DesignMethod::Sdr => design_sdr(&problem, cfg)?,
        DesignMethod::MinMaxProny => design_minmax_prony(&problem, cfg)?,
        DesignMethod::MinMaxSdr => design_minmax_sdr(&problem, cfg)?,
    })
}

/// Numbers separated by commas and/or whitespace.
pub fn parse_floats(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| CliError::Invalid(format!("`{s}`: {e}"))))
        .collect()
}

/// One verdict line per condition. The theorem and corollary need the
/// signal and the white-noise level; without them they are reported as
/// not evaluated.
pub fn check_report(lap: &Laplacian, w0: f64, omega: &[f64], signal: Option<&[f64]>, sigma: Option<f64>) -> Result<String> {
    if omega.len() != lap.n() {
        return Err(CliError::Invalid(format!("{} weights for a {}-node graph", omega.len(), lap.n())));
    }
    let verdict = |ok: bool| if ok { "holds" } else { "violated" };
    let min_sq = omega.iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    let max_sq = omega.iter().fold(0.0f64, |m, v| m.max(v * v));
    let mut s = String::new();
    let _ = writeln!(s, "lemma1: {} (w0 = {w0}, min w_i^2 = {min_sq})", verdict(check_lemma1(w0, omega)));
    match (signal, sigma) {
        (Some(x), Some(sigma)) => {
            let tq = theorem_quantities(lap, &GraphSignal::from_slice(x)?, &NoiseModel::white(sigma, 0))?;
            let _ = writeln!(
                s,
                "theorem1: {} (rho = {}, gamma = {}, lambda_max = {})",
                verdict(check_theorem1(w0, omega, &tq)),
                tq.rho,
                tq.gamma,
                tq.lambda_max_l
            );
            let _ = writeln!(
                s,
                "corollary1: {} (max w_i^2 = {max_sq}, bound = {})",
                verdict(check_corollary1(omega, &tq)),
                1.0 / (tq.rho * tq.lambda_max_l)
            );
        }
        _ => {
            let _ = writeln!(s, "theorem1: not evaluated (needs --signal and --sigma)");
            let _ = writeln!(s, "corollary1: not evaluated (needs --signal and --sigma)");
        }
    }
    Ok(s)
}
