//! Exact bias/variance/MSE of the regularised estimators and the sufficient
//! conditions under which node-adaptive weights beat a node-invariant weight.

use crate::error::{check_len, GsrError, Result};
use crate::estimators::Filter;
use crate::graph::{Laplacian, NodeWeights};
use crate::signal::{Covariance, GraphSignal, NoiseModel};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    pub bias_sq: f64,
    pub variance: f64,
    pub mse: f64,
}

/// Bias, variance and MSE of `x̂ = H·y` for `y = x* + n`, `n ~ N(0, Σ)`.
pub fn decompose_error(lap: &Laplacian, w: &NodeWeights, x_true: &GraphSignal, sigma: &NoiseModel) -> Result<ErrorDecomposition> {
    let n = lap.n();
    check_len("signal", n, x_true.len())?;
    sigma.validate(n)?;
    let h = Filter::new(lap, w)?.matrix;
    Ok(filter_error(&h, &x_true.values, &sigma.matrix(n)))
}

/// [`decompose_error`] for an arbitrary linear filter `H`.
pub fn filter_error(h: &DMatrix<f64>, x: &DVector<f64>, sigma: &DMatrix<f64>) -> ErrorDecomposition {
    let n = h.nrows();
    let i = DMatrix::<f64>::identity(n, n);
    let bias = (h - &i) * x;
    let h2 = h * h;
    let variance = (&h2 * sigma).trace();
    let ih = &i - h;
    let mse = (&ih * &ih * (x * x.transpose())).trace() + variance;
    ErrorDecomposition { bias_sq: bias.norm_squared(), variance, mse }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremQuantities {
    /// `x*ᵀΣ⁻¹x*`, the non-zero eigenvalue of `x*x*ᵀΣ⁻¹`.
    pub rho: f64,
    /// `ρ/(1+ρ)`.
    pub gamma: f64,
    pub lambda_max_l: f64,
}

pub fn theorem_quantities(lap: &Laplacian, x_true: &GraphSignal, sigma: &NoiseModel) -> Result<TheoremQuantities> {
    let n = lap.n();
    check_len("signal", n, x_true.len())?;
    sigma.validate(n)?;
    let x = &x_true.values;
    if x.norm_squared() == 0.0 {
        return Err(GsrError::ZeroSignal);
    }
    let singular = || GsrError::Singular("noise covariance".into());
    let rho = match &sigma.covariance {
        Covariance::Scalar(s2) if *s2 > 0.0 => x.norm_squared() / s2,
        Covariance::Diagonal(d) if d.iter().all(|v| *v > 0.0) => x.iter().zip(d.iter()).map(|(xi, di)| xi * xi / di).sum(),
        Covariance::Full(m) => {
            let chol = m.clone().cholesky().ok_or_else(singular)?;
            x.dot(&chol.solve(x))
        }
        _ => return Err(singular()),
    };
    Ok(TheoremQuantities { rho, gamma: rho / (1.0 + rho), lambda_max_l: lap.lambda_max() })
}

fn max_sq(w: &[f64]) -> f64 {
    w.iter().fold(0.0, |m, v| m.max(v * v))
}

/// `ω0 ≤ ω_i²` for every node (exact comparison).
pub fn check_lemma1(w0: f64, w: &[f64]) -> bool {
    w.iter().all(|wi| w0 <= wi * wi)
}

/// The node-wise floor together with
/// `2γ ≤ 1/(1+ω0·λ_max) + 1/(1+max ω_i²·λ_max)`.
pub fn check_theorem1(w0: f64, w: &[f64], tq: &TheoremQuantities) -> bool {
    let l = tq.lambda_max_l;
    check_lemma1(w0, w) && 2.0 * tq.gamma <= 1.0 / (1.0 + w0 * l) + 1.0 / (1.0 + max_sq(w) * l)
}

/// `max ω_i² ≤ 1/(ρ·λ_max)`; a zero product is an infinite bound.
pub fn check_corollary1(w: &[f64], tq: &TheoremQuantities) -> bool {
    let p = tq.rho * tq.lambda_max_l;
    p == 0.0 || max_sq(w) <= 1.0 / p
}

/// `√(θ/(λ₂·λ_N))` with `θ = √(1/SNR)`.
pub fn optimal_w0(lap: &Laplacian, snr_db: f64) -> Result<f64> {
    let l2 = lap.lambda2()?;
    let theta = (1.0 / 10f64.powf(snr_db / 10.0)).sqrt();
    Ok((theta / (l2 * lap.lambda_max())).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, Graph};

    #[test]
    fn singular_covariance_rejected() {
        let lap = laplacian(&Graph::new(2, [(0, 1, 1.0)]).unwrap());
        let x = GraphSignal::from_slice(&[1.0, 0.0]).unwrap();
        assert!(theorem_quantities(&lap, &x, &NoiseModel::white(0.0, 0)).is_err());
        let zero = GraphSignal::from_slice(&[0.0, 0.0]).unwrap();
        assert!(matches!(theorem_quantities(&lap, &zero, &NoiseModel::white(1.0, 0)), Err(GsrError::ZeroSignal)));
    }

    #[test]
    fn lemma1_exact_boundary() {
        assert!(check_lemma1(1.0, &[1.0, -1.0]));
        assert!(!check_lemma1(1.0, &[1.0, 0.999_999_999]));
        assert!(check_lemma1(0.0, &[]));
    }
}
