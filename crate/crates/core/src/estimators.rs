//! Reconstruction by node-adaptive Tikhonov regularisation:
//! `x̂(ω) = argmin ‖y − x‖² + xᵀS(ω)x = (I + S(ω))⁻¹ y`.

use crate::error::{check_len, GsrError, Result};
use crate::graph::{shift_operator, Laplacian, NodeWeights};
use crate::signal::{GraphSignal, Observation};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    ConjugateGradient,
    Distributed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual tolerance `ε` for conjugate gradient.
    pub cg_tolerance: f64,
    /// Iteration budget `T`; `None` means `10·n`.
    pub max_iterations: Option<usize>,
    pub warm_start: Option<DVector<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, cg_tolerance: 1e-8, max_iterations: None, warm_start: None }
    }
}

impl SolveOptions {
    pub fn with_method(method: SolveMethod) -> Self {
        Self { method, ..Self::default() }
    }

    fn budget(&self, n: usize) -> Result<usize> {
        if !(self.cg_tolerance > 0.0) {
            return Err(GsrError::InvalidInput(format!("tolerance {} must be positive", self.cg_tolerance)));
        }
        match self.max_iterations {
            Some(0) => Err(GsrError::InvalidInput("iteration budget must be at least 1".into())),
            Some(t) => Ok(t),
            None => Ok(10 * n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub estimate: GraphSignal,
    pub iterations_used: usize,
    /// `‖b − A·x̂‖` for the solved system.
    pub final_residual: f64,
    /// `‖S(ω)‖₂`, reported by the distributed recursion.
    pub spectral_norm_bound: Option<f64>,
    /// Set when `‖S(ω)‖₂ ≥ 1`, i.e. the recursion is not guaranteed to converge.
    pub divergence_warning: bool,
}

impl SolveReport {
    fn new(x: DVector<f64>, iterations_used: usize, final_residual: f64) -> Result<Self> {
        Ok(Self {
            estimate: GraphSignal::new(x)?,
            iterations_used,
            final_residual,
            spectral_norm_bound: None,
            divergence_warning: false,
        })
    }
}

/// Dense filter `H(ω) = (I + S(ω))⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub matrix: DMatrix<f64>,
}

impl Filter {
    pub fn new(lap: &Laplacian, w: &NodeWeights) -> Result<Self> {
        let n = lap.n();
        let a = DMatrix::identity(n, n) + shift_operator(lap, w)?.matrix;
        let chol = a.cholesky().ok_or_else(|| GsrError::Singular("I + S(ω) is not positive definite".into()))?;
        let h = chol.inverse();
        Ok(Self { matrix: (&h + h.transpose()) * 0.5 })
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.matrix * y
    }
}

fn require_full(obs: &Observation, n: usize) -> Result<()> {
    check_len("observation", n, obs.len())?;
    if !obs.is_full() {
        return Err(GsrError::InvalidInput("solver requires a fully observed signal; use solve_interpolation".into()));
    }
    Ok(())
}

/// `(I + S(ω))·x` via the edge-local product.
fn apply_system(lap: &Laplacian, w: &NodeWeights, x: &[f64], out: &mut [f64]) {
    lap.apply_shift(w, x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o += xi;
    }
}

pub fn solve(lap: &Laplacian, w: &NodeWeights, obs: &Observation, opts: &SolveOptions) -> Result<SolveReport> {
    match opts.method {
        SolveMethod::Direct => solve_direct(lap, w, obs),
        SolveMethod::ConjugateGradient => solve_cg(lap, w, obs, opts),
        SolveMethod::Distributed => solve_distributed(lap, w, obs, opts),
    }
}

pub fn solve_direct(lap: &Laplacian, w: &NodeWeights, obs: &Observation) -> Result<SolveReport> {
    let n = lap.n();
    require_full(obs, n)?;
    let a = DMatrix::identity(n, n) + shift_operator(lap, w)?.matrix;
    let x = a
        .clone()
        .cholesky()
        .ok_or_else(|| GsrError::Singular("I + S(ω) is not positive definite".into()))?
        .solve(&obs.y);
    let residual = (&obs.y - a * &x).norm();
    SolveReport::new(x, 1, residual)
}

/// Conjugate gradient for a symmetric positive definite operator. The loop
/// stops once `rᵀr ≤ ε²·‖y‖²`, which for a zero start is the usual
/// `ε²·r₀ᵀr₀` and lets a warm start at the solution exit immediately.
fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    y: &DVector<f64>,
    x0: DVector<f64>,
    eps: f64,
    t_max: usize,
) -> (DVector<f64>, usize, f64) {
    let n = y.len();
    let mut x = x0;
    let mut q = DVector::zeros(n);
    apply(x.as_slice(), q.as_mut_slice());
    let mut r = y - &q;
    let mut b = r.clone();
    let mut d_new = r.norm_squared();
    let threshold = eps * eps * y.norm_squared();
    let mut tau = 0;
    while tau < t_max && d_new > threshold {
        apply(b.as_slice(), q.as_mut_slice());
        let curvature = b.dot(&q);
        if curvature <= 0.0 {
            break;
        }
        let c = d_new / curvature;
        x.axpy(c, &b, 1.0);
        r.axpy(-c, &q, 1.0);
        let d_old = d_new;
        d_new = r.norm_squared();
        b = &r + &b * (d_new / d_old);
        tau += 1;
    }
    apply(x.as_slice(), q.as_mut_slice());
    let residual = (y - q).norm();
    (x, tau, residual)
}

pub fn solve_cg(lap: &Laplacian, w: &NodeWeights, obs: &Observation, opts: &SolveOptions) -> Result<SolveReport> {
    let n = lap.n();
    require_full(obs, n)?;
    w.check(n)?;
    let t_max = opts.budget(n)?;
    let x0 = match &opts.warm_start {
        Some(x0) => {
            check_len("warm start", n, x0.len())?;
            x0.clone()
        }
        None => DVector::zeros(n),
    };
    let (x, it, res) = conjugate_gradient(|v, out| apply_system(lap, w, v, out), &obs.y, x0, opts.cg_tolerance, t_max);
    SolveReport::new(x, it, res)
}

/// `‖S(ω)‖₂`, the largest eigenvalue of the PSD shift operator.
pub fn shift_spectral_norm(lap: &Laplacian, w: &NodeWeights) -> Result<f64> {
    let s = shift_operator(lap, w)?.matrix;
    Ok(if s.nrows() <= crate::graph::DENSE_EIGEN_LIMIT {
        SymmetricEigen::new(s).eigenvalues.amax()
    } else {
        crate::graph::power_iteration(&s, 1e-10, 100_000)
    })
}

/// Runs `x_τ = −S(ω)·x_{τ−1} + y` for `T` steps from `x_0 = 0` (or the warm start).
pub fn solve_distributed(lap: &Laplacian, w: &NodeWeights, obs: &Observation, opts: &SolveOptions) -> Result<SolveReport> {
    let n = lap.n();
    require_full(obs, n)?;
    let t_max = opts.budget(n)?;
    let norm = shift_spectral_norm(lap, w)?;
    let mut x = match &opts.warm_start {
        Some(x0) => {
            check_len("warm start", n, x0.len())?;
            x0.clone()
        }
        None => DVector::zeros(n),
    };
    let mut sx = DVector::zeros(n);
    for _ in 0..t_max {
        lap.apply_shift(w, x.as_slice(), sx.as_mut_slice());
        x = &obs.y - &sx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GsrError::InvalidInput(format!("distributed recursion overflowed (‖S‖ = {norm})")));
    }
    apply_system(lap, w, x.as_slice(), sx.as_mut_slice());
    let residual = (&obs.y - &sx).norm();
    let mut report = SolveReport::new(x, t_max, residual)?;
    report.spectral_norm_bound = Some(norm);
    report.divergence_warning = norm >= 1.0;
    Ok(report)
}

/// Solves `(P_M + S(ω))·x̂ = P_M·y` where `P_M` selects the observed nodes.
/// Direct and conjugate-gradient methods are supported.
pub fn solve_interpolation(
    lap: &Laplacian,
    w: &NodeWeights,
    obs: &Observation,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let n = lap.n();
    check_len("observation", n, obs.len())?;
    let mut a = shift_operator(lap, w)?.matrix;
    let mut p = DVector::zeros(n);
    for &i in obs.mask() {
        a[(i, i)] += 1.0;
        p[i] = 1.0;
    }
    let ev = SymmetricEigen::new(a.clone()).eigenvalues;
    if ev.min() <= 1e-12 * ev.amax().max(1.0) {
        return Err(GsrError::Singular(
            "P_M + S(ω) is singular: some unobserved component is not coupled to any observation".into(),
        ));
    }
    let rhs = obs.y.component_mul(&p);
    match opts.method {
        SolveMethod::Direct => {
            let x = a.clone().cholesky().ok_or_else(|| GsrError::Singular("P_M + S(ω)".into()))?.solve(&rhs);
            let residual = (&rhs - &a * &x).norm();
            SolveReport::new(x, 1, residual)
        }
        SolveMethod::ConjugateGradient => {
            let t_max = opts.budget(n)?;
            let x0 = opts.warm_start.clone().unwrap_or_else(|| DVector::zeros(n));
            check_len("warm start", n, x0.len())?;
            let apply = |v: &[f64], out: &mut [f64]| {
                lap.apply_shift(w, v, out);
                for i in 0..n {
                    out[i] += p[i] * v[i];
                }
            };
            let (x, it, res) = conjugate_gradient(apply, &rhs, x0, opts.cg_tolerance, t_max);
            SolveReport::new(x, it, res)
        }
        SolveMethod::Distributed => {
            Err(GsrError::InvalidInput("the distributed recursion applies to full observations only".into()))
        }
    }
}

/// Diffusion kernel `exp(−σ²·L/2)` via the Laplacian eigendecomposition.
pub fn diffusion_kernel(lap: &Laplacian, sigma2: f64) -> Result<DMatrix<f64>> {
    let u = lap.eigenvectors()?;
    let lam = lap.eigenvalues()?;
    let d = lam.map(|l| (-sigma2 * l / 2.0).exp());
    Ok(u * DMatrix::from_diagonal(&d) * u.transpose())
}

/// Kernel ridge regression `x̂ = K_{:,M}(K_MM + |M|·μ·I)⁻¹ y_M`.
pub fn solve_krr_diffusion(lap: &Laplacian, obs: &Observation, sigma2_krr: f64, mu_krr: f64) -> Result<SolveReport> {
    let n = lap.n();
    check_len("observation", n, obs.len())?;
    if !(sigma2_krr >= 0.0 && mu_krr >= 0.0) {
        return Err(GsrError::InvalidInput("kernel parameters must be non-negative".into()));
    }
    let k = diffusion_kernel(lap, sigma2_krr)?;
    let m = obs.mask();
    let nm = m.len();
    let kmm = DMatrix::from_fn(nm, nm, |a, b| k[(m[a], m[b])]) + DMatrix::identity(nm, nm) * (nm as f64 * mu_krr);
    let ym = DVector::from_fn(nm, |a, _| obs.y[m[a]]);
    let alpha = kmm
        .clone()
        .cholesky()
        .ok_or_else(|| GsrError::Singular("regularised kernel matrix".into()))?
        .solve(&ym);
    let residual = (&ym - &kmm * &alpha).norm();
    let knm = DMatrix::from_fn(n, nm, |i, b| k[(i, m[b])]);
    SolveReport::new(knm * alpha, 1, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, Graph};

    #[test]
    fn partial_observation_rejected_by_full_solvers() {
        let lap = laplacian(&Graph::new(2, [(0, 1, 1.0)]).unwrap());
        let obs = Observation::masked(DVector::from_column_slice(&[1.0, 0.0]), &[0]).unwrap();
        let w = NodeWeights::Invariant(1.0);
        assert!(solve_direct(&lap, &w, &obs).is_err());
        assert!(solve_cg(&lap, &w, &obs, &SolveOptions::default()).is_err());
        assert!(solve_distributed(&lap, &w, &obs, &SolveOptions::default()).is_err());
    }

    #[test]
    fn options_validated() {
        let lap = laplacian(&Graph::new(2, [(0, 1, 1.0)]).unwrap());
        let obs = Observation::full(DVector::from_column_slice(&[1.0, 0.0]));
        let w = NodeWeights::Invariant(1.0);
        let bad = SolveOptions { max_iterations: Some(0), ..SolveOptions::default() };
        assert!(solve_cg(&lap, &w, &obs, &bad).is_err());
        let bad = SolveOptions { cg_tolerance: 0.0, ..SolveOptions::default() };
        assert!(solve_cg(&lap, &w, &obs, &bad).is_err());
    }

    #[test]
    fn zero_observation_cg_stops_immediately() {
        let lap = laplacian(&Graph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let obs = Observation::full(DVector::zeros(3));
        let r = solve_cg(&lap, &NodeWeights::Invariant(1.0), &obs, &SolveOptions::default()).unwrap();
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.estimate.values, DVector::zeros(3));
    }
}
