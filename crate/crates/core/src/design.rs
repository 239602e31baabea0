//! Weight design: choose `ω` (through the lifted matrix `Ω ≈ ωωᵀ`) so that the
//! node-adaptive estimator reconstructs a prior signal well.
//!
//! All designs are convex programs over the PSD cone, solved with
//! [`gsr_conic`], followed by rank-one extraction of `ω` from `Ω`.

use crate::error::{check_len, GsrError, Result};
use crate::graph::{sorted_eigen, Laplacian, NodeWeights};
use crate::signal::{NoiseModel, SignalBounds};
use gsr_conic::{
    solve_ipm, svec_index, svec_len, svec_scale, AffineExpr, Cone, ConicProblem, IpmSettings, ProblemBuilder, Settings, Solution,
    Status,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::fmt::Write as _;

/// What is known about the signal to be reconstructed.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    ExactSignal(DVector<f64>),
    /// An estimate of `E[x*x*ᵀ]`.
    SignalOuterProduct(DMatrix<f64>),
    Bounds(SignalBounds),
}

#[derive(Debug, Clone)]
pub struct DesignProblem<'a> {
    pub lap: &'a Laplacian,
    pub prior: Prior,
    /// Required by the relaxation designs.
    pub noise: Option<NoiseModel>,
    /// Floor on `Ω_ii`.
    pub w0_star: f64,
    /// Additional worst-case candidates for the min-max designs, beyond the
    /// two bound corners.
    pub extra_candidates: Vec<DVector<f64>>,
}

impl<'a> DesignProblem<'a> {
    pub fn new(lap: &'a Laplacian, prior: Prior, w0_star: f64) -> Self {
        Self { lap, prior, noise: None, w0_star, extra_candidates: Vec::new() }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.lap.n();
        if !(self.w0_star >= 0.0 && self.w0_star.is_finite()) {
            return Err(GsrError::InvalidInput(format!("ω0* = {} must be non-negative", self.w0_star)));
        }
        match &self.prior {
            Prior::ExactSignal(x) => check_len("prior signal", n, x.len())?,
            Prior::SignalOuterProduct(x) => {
                check_len("prior outer product", n, x.nrows())?;
                check_len("prior outer product", n, x.ncols())?;
                let ev = SymmetricEigen::new((x + x.transpose()) * 0.5).eigenvalues;
                if ev.min() < -1e-9 * ev.amax().max(1.0) {
                    return Err(GsrError::NotPositiveSemidefinite { min_eigenvalue: ev.min() });
                }
            }
            Prior::Bounds(b) => check_len("signal bounds", n, b.lower.len())?,
        }
        for c in &self.extra_candidates {
            check_len("candidate signal", n, c.len())?;
        }
        if let Some(noise) = &self.noise {
            noise.validate(n)?;
        }
        Ok(())
    }

    /// `X` for the single-prior designs.
    fn second_moment(&self) -> Result<DMatrix<f64>> {
        match &self.prior {
            Prior::ExactSignal(x) => Ok(x * x.transpose()),
            Prior::SignalOuterProduct(x) => Ok((x + x.transpose()) * 0.5),
            Prior::Bounds(_) => Err(GsrError::InvalidInput("bounds prior requires a min-max design".into())),
        }
    }

    /// Worst-case candidates `{x_l, x_u} ∪ extra`, with duplicate outer products removed.
    fn corners(&self) -> Result<Vec<DVector<f64>>> {
        let Prior::Bounds(b) = &self.prior else {
            return Err(GsrError::InvalidInput("min-max design requires a bounds prior".into()));
        };
        let mut out: Vec<DVector<f64>> = Vec::new();
        for c in [&b.lower, &b.upper].into_iter().chain(self.extra_candidates.iter()) {
            let outer = c * c.transpose();
            if !out.iter().any(|o| o * o.transpose() == outer) {
                out.push(c.clone());
            }
        }
        Ok(out)
    }

    fn noise_matrix(&self) -> Result<DMatrix<f64>> {
        let noise = self
            .noise
            .as_ref()
            .ok_or_else(|| GsrError::InvalidInput("relaxation design requires a noise model".into()))?;
        Ok(noise.matrix(self.lap.n()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpBackend {
    InteriorPoint,
    FirstOrderSplitting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolverConfig {
    /// Absolute and relative tolerance on primal and dual residuals.
    pub tolerance: f64,
    /// `None` uses the backend's own limit.
    pub max_iterations: Option<usize>,
    pub backend: SdpBackend,
}

impl Default for SdpSolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-7, max_iterations: None, backend: SdpBackend::InteriorPoint }
    }
}

impl SdpSolverConfig {
    fn solve(&self, problem: &ConicProblem) -> Result<Solution> {
        if !(self.tolerance > 0.0) {
            return Err(GsrError::InvalidInput(format!("tolerance {} must be positive", self.tolerance)));
        }
        let eps = self.tolerance;
        Ok(match self.backend {
            SdpBackend::InteriorPoint => {
                let d = IpmSettings::default();
                let max_iter = self.max_iterations.unwrap_or(d.max_iter);
                solve_ipm(problem, &IpmSettings { eps_abs: eps, eps_rel: eps, max_iter, ..d })?
            }
            SdpBackend::FirstOrderSplitting => {
                let d = Settings::default();
                let max_iter = self.max_iterations.unwrap_or(d.max_iter);
                gsr_conic::solve(problem, &Settings { eps_abs: eps, eps_rel: eps, max_iter, ..d })?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    /// Extracted weights (always `NodeWeights::Adaptive`).
    pub omega: NodeWeights,
    /// The lifted matrix `Ω`.
    pub omega_matrix: DMatrix<f64>,
    /// Design objective evaluated at `omega_matrix` (worst case for min-max).
    pub objective_value: f64,
    pub solver_stats: SolverStats,
    /// `λ₁/Σλ_i` of `Ω`.
    pub rank1_quality: f64,
    /// Filter variable of the relaxation designs.
    pub filter: Option<DMatrix<f64>>,
    /// Residual of the least-squares recovery of `Ω` from the filter.
    pub recovery_residual: Option<f64>,
}

impl DesignResult {
    pub fn weights(&self) -> DVector<f64> {
        match &self.omega {
            NodeWeights::Adaptive(w) => w.clone(),
            NodeWeights::Invariant(w0) => DVector::from_element(self.omega_matrix.nrows(), w0.sqrt()),
        }
    }

    /// `omega=<csv>; objective=<f>; rank1_quality=<f>; residuals=<primal>,<dual>`
    pub fn to_record(&self) -> String {
        let w = self.weights();
        let csv = w.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = write!(
            s,
            "omega={csv}; objective={}; rank1_quality={}; residuals={},{}",
            self.objective_value, self.rank1_quality, self.solver_stats.primal_residual, self.solver_stats.dual_residual
        );
        s
    }
}

/// Fields of a serialised [`DesignResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRecord {
    pub omega: Vec<f64>,
    pub objective: f64,
    pub rank1_quality: f64,
    pub residuals: Vec<f64>,
}

pub fn parse_record(text: &str) -> Result<DesignRecord> {
    let bad = |m: String| GsrError::Parse { line: 1, message: m };
    let floats = |v: &str| -> Result<Vec<f64>> {
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| bad(format!("`{x}`: {e}")))).collect()
    };
    let (mut omega, mut objective, mut quality, mut residuals) = (None, None, None, None);
    for field in text.trim().split(';') {
        let (k, v) = field.split_once('=').ok_or_else(|| bad(format!("missing `=` in `{field}`")))?;
        match k.trim() {
            "omega" => omega = Some(floats(v)?),
            "objective" => objective = Some(v.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "rank1_quality" => quality = Some(v.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "residuals" => residuals = Some(floats(v)?),
            other => return Err(bad(format!("unknown field `{other}`"))),
        }
    }
    Ok(DesignRecord {
        omega: omega.ok_or_else(|| bad("missing omega".into()))?,
        objective: objective.ok_or_else(|| bad("missing objective".into()))?,
        rank1_quality: quality.ok_or_else(|| bad("missing rank1_quality".into()))?,
        residuals: residuals.ok_or_else(|| bad("missing residuals".into()))?,
    })
}

/// `tr{(Ω⊙L)²·X}`.
pub fn prony_objective(lap: &Laplacian, x: &DMatrix<f64>, omega: &DMatrix<f64>) -> f64 {
    let s = omega.component_mul(lap.matrix());
    (&s * &s * x).trace()
}

/// `tr{(H² − 2H + I)·X + H²·Σ}`.
pub fn sdr_objective(h: &DMatrix<f64>, x: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    let h2 = h * h;
    ((&h2 - h * 2.0 + DMatrix::identity(n, n)) * x + &h2 * sigma).trace()
}

/// Leading eigenpair `√λ₁·u₁`, signed to have a non-negative sum, and `λ₁/Σλ_i`.
pub fn rank_one_extract(omega: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let n = omega.nrows();
    let spec = sorted_eigen(&((omega + omega.transpose()) * 0.5));
    let l1 = spec.values[n - 1];
    let total: f64 = spec.values.iter().map(|v| v.max(0.0)).sum();
    if l1 <= 0.0 || total == 0.0 {
        return (DVector::zeros(n), 1.0);
    }
    let mut w = spec.vectors.column(n - 1) * l1.sqrt();
    if w.sum() < 0.0 {
        w = -w;
    }
    (w, l1 / total)
}

/// Symmetric matrix variable stored as its lower triangle, in PSD-cone order.
#[derive(Debug, Clone, Copy)]
struct SymVar {
    offset: usize,
    n: usize,
}

impl SymVar {
    fn len(&self) -> usize {
        svec_len(self.n)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.offset + svec_index(r, c, self.n)
    }

    /// PSD-cone rows for `scale_i·scale_j·V_ij`.
    fn psd_rows(&self, scale: &[f64]) -> Vec<AffineExpr> {
        let mut rows = vec![AffineExpr::default(); self.len()];
        for j in 0..self.n {
            for i in j..self.n {
                rows[svec_index(i, j, self.n)] = AffineExpr::var(self.idx(i, j), svec_scale(i, j) * scale[i] * scale[j]);
            }
        }
        rows
    }

    fn to_matrix(&self, x: &[f64], scale: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| x[self.idx(i, j)] * scale[i] * scale[j])
    }
}

/// Columns `F` with `F·Fᵀ = M` (non-negative eigen-part of a symmetric `M`).
fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 1e-14 * top.max(1e-300)).collect();
    DMatrix::from_fn(n, keep.len(), |i, c| eig.eigenvectors[(i, keep[c])] * eig.eigenvalues[keep[c]].sqrt())
}

/// `((Ω⊙L)·f)_i` as an affine form of the (scaled) `Ω` variables, where
/// `Ω_ij = t_i t_j Ψ_ij`.
fn shifted_row(lap: &Laplacian, om: &SymVar, t: &[f64], f: &[f64], i: usize) -> AffineExpr {
    let l = lap.matrix();
    let mut e = AffineExpr::var(om.idx(i, i), l[(i, i)] * t[i] * t[i] * f[i]);
    for &(j, _) in &lap.neighbors()[i] {
        let c = l[(i, j)] * t[i] * t[j] * f[j];
        if c != 0.0 {
            e = e.with_term(om.idx(i, j), c);
        }
    }
    e
}

/// Diagonal congruence `Ω = TΨT`, `T_ii = t_i`, equalising the scale of the
/// Prony optimum `Ω ∝ (1/x)(1/x)ᵀ`. It preserves positive semidefiniteness
/// and leaves the optimal value unchanged.
fn prony_scaling(diag: &[f64]) -> Vec<f64> {
    let top = diag.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return vec![1.0; diag.len()];
    }
    diag.iter().map(|&d| (top / d.max(1e-12 * top)).sqrt()).collect()
}

fn solve_checked(pb: ProblemBuilder, cfg: &SdpSolverConfig) -> Result<Solution> {
    let sol = cfg.solve(&pb.build()?)?;
    if sol.status != Status::Solved {
        return Err(GsrError::SolverNotConverged {
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
        });
    }
    Ok(sol)
}

fn stats(sol: &Solution) -> SolverStats {
    SolverStats { iterations: sol.iterations, primal_residual: sol.primal_residual, dual_residual: sol.dual_residual }
}

/// Symmetrises, clips negative eigenvalues and lifts the diagonal to `floor`.
/// Adding a non-negative diagonal keeps the matrix PSD.
fn polish(omega: DMatrix<f64>, floor: Option<f64>) -> DMatrix<f64> {
    let sym = (&omega + omega.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut m = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0))) * eig.eigenvectors.transpose();
    m = (&m + m.transpose()) * 0.5;
    if let Some(f) = floor {
        for i in 0..m.nrows() {
            if m[(i, i)] < f {
                m[(i, i)] = f;
            }
        }
    }
    m
}

fn finish(omega_matrix: DMatrix<f64>, objective_value: f64, sol: &Solution) -> DesignResult {
    let (w, q) = rank_one_extract(&omega_matrix);
    DesignResult {
        omega: NodeWeights::Adaptive(w),
        omega_matrix,
        objective_value,
        solver_stats: stats(sol),
        rank1_quality: q,
        filter: None,
        recovery_residual: None,
    }
}

/// Prony-type design over the candidate second moments `xs` (worst case when
/// more than one), with an optional floor on `Ω_ii`.
fn prony_core(lap: &Laplacian, xs: &[DMatrix<f64>], floor: Option<f64>, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    let n = lap.n();
    let diag: Vec<f64> = (0..n).map(|i| xs.iter().map(|x| x[(i, i)]).sum::<f64>() / xs.len() as f64).collect();
    let t = prony_scaling(&diag);
    let om = SymVar { offset: 0, n };
    let minmax = xs.len() > 1;
    let n_vars = om.len() + usize::from(minmax);
    let epi = om.len();
    let mut pb = ProblemBuilder::new(n_vars);
    let norm = xs.iter().map(|x| x.trace()).fold(0.0, f64::max);
    let norm = if norm > 0.0 { norm } else { 1.0 };

    for x in xs {
        let f = psd_factor(&(x / norm));
        let mut rows = Vec::new();
        for k in 0..f.ncols() {
            let col: Vec<f64> = f.column(k).iter().copied().collect();
            for i in 0..n {
                rows.push(shifted_row(lap, &om, &t, &col, i));
            }
        }
        if minmax {
            // ‖v‖² ≤ u  ⇔  ‖(2v, u − 1)‖ ≤ u + 1
            let u = AffineExpr::var(epi, 1.0);
            let mut cone = vec![u.clone().with_constant(1.0), u.with_constant(-1.0)];
            cone.extend(rows.into_iter().map(|mut r| {
                r.terms.iter_mut().for_each(|(_, c)| *c *= 2.0);
                r
            }));
            pb.add_cone(Cone::SecondOrder(cone.len()), cone)?;
        } else {
            for r in rows {
                pb.add_squared(1.0, r);
            }
        }
    }
    if minmax {
        pb.add_linear_cost(epi, 1.0);
    }
    // A rank-one X leaves a whole ray of optimal Ω (zero cost along
    // Ω ∝ (1/x)(1/x)ᵀ). A trace tie-break worth 1e-7 of the cost of the
    // diagonal point Ψ = w·I at w = ω0* selects the smallest optimum and keeps
    // the optimal face bounded.
    let w_ref = floor.unwrap_or(1.0);
    let diag_cost = xs
        .iter()
        .map(|x| (0..n).map(|i| (t[i] * t[i] * lap.matrix()[(i, i)]).powi(2) * x[(i, i)] / norm).sum::<f64>())
        .fold(0.0, f64::max);
    // with X = 0 every feasible Ω is optimal and the tie-break alone decides
    let diag_cost = if diag_cost > 0.0 { diag_cost } else { 1.0 };
    let tie = 1e-7 * w_ref * diag_cost / n as f64;
    for i in 0..n {
        pb.add_linear_cost(om.idx(i, i), tie);
    }
    if let Some(w0) = floor {
        let rows = (0..n).map(|i| AffineExpr::var(om.idx(i, i), 1.0).with_constant(-w0 / (t[i] * t[i]))).collect();
        pb.add_cone(Cone::Nonnegative(n), rows)?;
    }
    pb.add_cone(Cone::Psd(n), om.psd_rows(&vec![1.0; n]))?;
    let sol = solve_checked(pb, cfg)?;

    let omega = polish(om.to_matrix(&sol.x, &t), floor);
    let objective = xs.iter().map(|x| prony_objective(lap, x, &omega)).fold(f64::NEG_INFINITY, f64::max);
    Ok(finish(omega, objective, &sol))
}

/// Minimises `tr{(Ω⊙L)²X}` over PSD `Ω` with `Ω_ii ≥ ω0*`.
pub fn design_prony(problem: &DesignProblem, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    problem.validate()?;
    prony_core(problem.lap, &[problem.second_moment()?], Some(problem.w0_star), cfg)
}

/// [`design_prony`] without the diagonal floor.
pub fn design_prony_unconstrained(problem: &DesignProblem, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    problem.validate()?;
    prony_core(problem.lap, &[problem.second_moment()?], None, cfg)
}

/// Worst case of the Prony cost over the bound corners (and extra candidates).
pub fn design_minmax_prony(problem: &DesignProblem, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    problem.validate()?;
    let xs: Vec<DMatrix<f64>> = problem.corners()?.iter().map(|c| c * c.transpose()).collect();
    prony_core(problem.lap, &xs, Some(problem.w0_star), cfg)
}

/// Relaxation over `(Ω, H)`: worst case over `xs` of
/// `tr{(H² − 2H + I)X + H²Σ}` subject to `[[I + Ω⊙L, I], [I, H]] ⪰ 0`,
/// `Ω ⪰ 0`, `Ω_ii ≥ ω0*`.
fn sdr_core(problem: &DesignProblem, xs: &[DMatrix<f64>], cfg: &SdpSolverConfig) -> Result<DesignResult> {
    let lap = problem.lap;
    let n = lap.n();
    let sigma = problem.noise_matrix()?;
    let om = SymVar { offset: 0, n };
    let hv = SymVar { offset: om.len(), n };
    let minmax = xs.len() > 1;
    let epi = om.len() + hv.len();
    let mut pb = ProblemBuilder::new(epi + usize::from(minmax));
    let scale = xs.iter().map(|x| (x + &sigma).trace()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    for x in xs {
        let x = x / scale;
        let c = &x + &sigma / scale;
        let f = psd_factor(&c);
        // tr(H²C) = ‖H·F‖²
        let mut quad = Vec::new();
        for k in 0..f.ncols() {
            for i in 0..n {
                let mut e = AffineExpr::default();
                for j in 0..n {
                    if f[(j, k)] != 0.0 {
                        e = e.with_term(hv.idx(i, j), f[(j, k)]);
                    }
                }
                quad.push(e);
            }
        }
        // −2 tr(HX) + tr X
        let mut lin = AffineExpr::constant(x.trace());
        for j in 0..n {
            for i in j..n {
                let coeff = if i == j { -2.0 * x[(i, i)] } else { -4.0 * x[(i, j)] };
                if coeff != 0.0 {
                    lin = lin.with_term(hv.idx(i, j), coeff);
                }
            }
        }
        if minmax {
            // ‖HF‖² ≤ t − lin  via a rotated cone
            let u = lin.terms.iter().fold(AffineExpr::var(epi, 1.0).with_constant(-lin.constant), |e, &(j, c)| e.with_term(j, -c));
            let mut cone = vec![u.clone().with_constant(1.0), u.with_constant(-1.0)];
            cone.extend(quad.into_iter().map(|mut r| {
                r.terms.iter_mut().for_each(|(_, c)| *c *= 2.0);
                r
            }));
            pb.add_cone(Cone::SecondOrder(cone.len()), cone)?;
        } else {
            for q in quad {
                pb.add_squared(1.0, q);
            }
            for &(j, c) in &lin.terms {
                pb.add_linear_cost(j, c);
            }
            pb.add_cost_offset(lin.constant);
        }
    }
    if minmax {
        pb.add_linear_cost(epi, 1.0);
    }

    let ones = vec![1.0; n];
    let rows = (0..n).map(|i| AffineExpr::var(om.idx(i, i), 1.0).with_constant(-problem.w0_star)).collect();
    pb.add_cone(Cone::Nonnegative(n), rows)?;
    pb.add_cone(Cone::Psd(n), om.psd_rows(&ones))?;

    // [[I + Ω⊙L, I], [I, H]] ⪰ 0
    let m = 2 * n;
    let l = lap.matrix();
    let mut lmi = vec![AffineExpr::default(); svec_len(m)];
    for j in 0..m {
        for i in j..m {
            let s = svec_scale(i, j);
            let e = if j < n && i < n {
                let c = if i == j { 1.0 } else { 0.0 };
                if l[(i, j)] != 0.0 {
                    AffineExpr::var(om.idx(i, j), s * l[(i, j)]).with_constant(s * c)
                } else {
                    AffineExpr::constant(s * c)
                }
            } else if j < n {
                AffineExpr::constant(if i - n == j { s } else { 0.0 })
            } else {
                AffineExpr::var(hv.idx(i - n, j - n), s)
            };
            lmi[svec_index(i, j, m)] = e;
        }
    }
    pb.add_cone(Cone::Psd(m), lmi)?;
    let sol = solve_checked(pb, cfg)?;

    let h = hv.to_matrix(&sol.x, &ones);
    let h = (&h + h.transpose()) * 0.5;
    let relaxed = sdr_value(xs, &h, &sigma);
    let (omega, residual) = recover_core(&h, lap, cfg, Some(problem.w0_star))?;
    let mut result = finish(omega, relaxed, &sol);
    result.filter = Some(h);
    result.recovery_residual = Some(residual);
    Ok(result)
}

fn sdr_value(xs: &[DMatrix<f64>], h: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    xs.iter().map(|x| sdr_objective(h, x, sigma)).fold(f64::NEG_INFINITY, f64::max)
}

/// Semidefinite relaxation of the MSE-optimal design, followed by recovery
/// of `Ω` from the optimal filter and rank-one extraction.
pub fn design_sdr(problem: &DesignProblem, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    problem.validate()?;
    sdr_core(problem, &[problem.second_moment()?], cfg)
}

/// [`design_sdr`] with the worst case over the bound corners.
pub fn design_minmax_sdr(problem: &DesignProblem, cfg: &SdpSolverConfig) -> Result<DesignResult> {
    problem.validate()?;
    let xs: Vec<DMatrix<f64>> = problem.corners()?.iter().map(|c| c * c.transpose()).collect();
    sdr_core(problem, &xs, cfg)
}

/// Least-squares `Ω` with `(I + Ω⊙L) ≈ H*⁻¹`:
/// minimises `‖H*(I+Ω⊙L) − I‖² + ‖(I+Ω⊙L)H* − I‖²` over PSD `Ω` supported on
/// the diagonal and the edges of the graph.
pub fn recover_omega(h_star: &DMatrix<f64>, lap: &Laplacian, cfg: &SdpSolverConfig) -> Result<DMatrix<f64>> {
    Ok(recover_omega_with_residual(h_star, lap, cfg)?.0)
}

/// [`recover_omega`] together with the attained least-squares residual.
pub fn recover_omega_with_residual(h_star: &DMatrix<f64>, lap: &Laplacian, cfg: &SdpSolverConfig) -> Result<(DMatrix<f64>, f64)> {
    recover_core(h_star, lap, cfg, None)
}

/// The relaxation designs keep the floor `Ω_ii ≥ ω0*` through the recovery.
fn recover_core(h_star: &DMatrix<f64>, lap: &Laplacian, cfg: &SdpSolverConfig, floor: Option<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = lap.n();
    check_len("filter", n, h_star.nrows())?;
    check_len("filter", n, h_star.ncols())?;
    let h = (h_star + h_star.transpose()) * 0.5;
    let ev = SymmetricEigen::new(h.clone()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.amax());
    if lo <= 0.0 || hi / lo > 1e12 {
        return Err(GsrError::IllConditioned(if lo <= 0.0 { f64::INFINITY } else { hi / lo }));
    }
    let l = lap.matrix();
    let nb = lap.neighbors();
    let mut support: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for (i, list) in nb.iter().enumerate() {
        support.extend(list.iter().filter(|&&(j, _)| j < i).map(|&(j, _)| (i, j)));
    }
    let mut index = std::collections::HashMap::new();
    for (k, &(i, j)) in support.iter().enumerate() {
        index.insert((i, j), k);
    }
    let var = |i: usize, j: usize| index[&(i.max(j), i.min(j))];

    // (H(I + Ω⊙L) − I)_ik = H_ik − δ_ik + Σ_j H_ij L_jk Ω_jk; the transposed
    // term has the same entries, hence weight 2.
    let mut pb = ProblemBuilder::new(support.len());
    let mut design = DMatrix::zeros(n * n, support.len());
    let mut rhs = DVector::zeros(n * n);
    for k in 0..n {
        let mut cols: Vec<usize> = nb[k].iter().map(|&(j, _)| j).collect();
        cols.push(k);
        for i in 0..n {
            let c0 = h[(i, k)] - if i == k { 1.0 } else { 0.0 };
            let mut e = AffineExpr::constant(c0);
            rhs[k * n + i] = -c0;
            for &j in &cols {
                let c = h[(i, j)] * l[(j, k)];
                if c != 0.0 {
                    e = e.with_term(var(j, k), c);
                    design[(k * n + i, var(j, k))] += c;
                }
            }
            pb.add_squared(2.0, e);
        }
    }
    // PSD on the support-restricted Ω
    let mut rows = vec![AffineExpr::default(); svec_len(n)];
    for (k, &(i, j)) in support.iter().enumerate() {
        rows[svec_index(i, j, n)] = AffineExpr::var(k, svec_scale(i, j));
    }
    pb.add_cone(Cone::Psd(n), rows)?;
    if let Some(w0) = floor {
        pb.add_cone(Cone::Nonnegative(n), (0..n).map(|i| AffineExpr::var(var(i, i), 1.0).with_constant(-w0)).collect())?;
    }
    let sol = solve_checked(pb, cfg)?;
    let assemble = |v: &DVector<f64>| {
        let mut omega = DMatrix::zeros(n, n);
        for (k, &(i, j)) in support.iter().enumerate() {
            omega[(i, j)] = v[k];
            omega[(j, i)] = v[k];
        }
        omega
    };
    let mut omega = assemble(&DVector::from_column_slice(&sol.x));
    // The unconstrained least-squares fit is the exact optimum whenever it is
    // feasible; the interior-point iterate only approaches it.
    if let Ok(v) = design.svd(true, true).solve(&rhs, 1e-14) {
        let fit = assemble(&v);
        let psd = SymmetricEigen::new(fit.clone()).eigenvalues.min() >= 0.0;
        if psd && floor.is_none_or(|w0| fit.diagonal().min() >= w0) {
            omega = fit;
        }
    }
    if let Some(w0) = floor {
        // round-off below the floor; a non-negative diagonal shift keeps Ω PSD
        for i in 0..n {
            omega[(i, i)] = omega[(i, i)].max(w0);
        }
    }
    let a = DMatrix::identity(n, n) + omega.component_mul(l);
    let id = DMatrix::<f64>::identity(n, n);
    let residual = (&h * &a - &id).norm_squared() + (&a * &h - &id).norm_squared();
    Ok((omega, residual))
}
