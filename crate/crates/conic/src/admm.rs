//! Operator-splitting solver.
//!
//! ADMM on the splitting `Ax + s = b, s ∈ K`, with a quasi-definite linear
//! system solved by [`Kkt`], over-relaxation, Ruiz equilibration and adaptive
//! step size. Convergence is declared on the unscaled residuals.

use crate::cone::Cone;
use crate::error::ConicError;
use crate::anderson::Anderson;
use crate::kkt::Kkt;
use crate::problem::ConicProblem;
use crate::scaling::{a_mul, at_mul, p_mul, ruiz};

#[derive(Debug, Clone)]
pub struct Settings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adaptive_rho: bool,
    /// Iterations between step-size updates.
    pub adaptive_rho_interval: usize,
    pub scaling_iters: usize,
    /// Iterations between convergence checks.
    pub check_interval: usize,
    /// Anderson acceleration memory; 0 disables acceleration.
    pub anderson_memory: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-7,
            eps_rel: 1e-7,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            adaptive_rho_interval: 50,
            scaling_iters: 10,
            check_interval: 10,
            anderson_memory: 10,
        }
    }
}

impl Settings {
    fn validate(&self) -> Result<(), ConicError> {
        let bad = |m: &str| Err(ConicError::InvalidSettings(m.to_string()));
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if !(self.rho > 0.0 && self.sigma > 0.0) {
            return bad("rho and sigma must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad("alpha must lie in (0, 2)");
        }
        if self.check_interval == 0 || self.adaptive_rho_interval == 0 {
            return bad("intervals must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved,
    MaxIterations,
    /// The interior-point method could not make further progress.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Slack `b − Ax`, projected onto the cone.
    pub s: Vec<f64>,
    /// Cone multiplier `y ∈ K*` satisfying `Px + q + Aᵀy = 0` at optimality.
    pub y: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

/// Largest tolerated growth of the fixed-point residual after an extrapolated step.
const SAFEGUARD: f64 = 1.0;

fn project(cones: &[Cone], v: &mut [f64]) {
    let mut start = 0;
    for cone in cones {
        let k = cone.dim();
        cone.project(&mut v[start..start + k]);
        start += k;
    }
}

struct Residuals {
    primal: f64,
    dual: f64,
    primal_scale: f64,
    dual_scale: f64,
}

/// Solves `problem` to the tolerances in `settings`.
///
/// Hitting the iteration limit is not an error: the last iterate is returned
/// with [`Status::MaxIterations`] so callers can inspect residuals.
pub fn solve(problem: &ConicProblem, settings: &Settings) -> Result<Solution, ConicError> {
    settings.validate()?;
    let n = problem.n_vars;
    let m = problem.b.len();
    let sc = ruiz(problem, settings.scaling_iters);

    let mut row_weight = vec![1.0; m];
    {
        let mut start = 0;
        for cone in &problem.cones {
            if let Cone::Zero(k) = cone {
                row_weight[start..start + k].iter_mut().for_each(|w| *w = 1e3);
            }
            start += cone.dim();
        }
    }
    let mut rho = settings.rho;
    let mut kkt = Kkt::new(n, &sc.p, &sc.a, &row_weight, settings.sigma);
    kkt.factor(rho)?;

    let sigma = settings.sigma;
    let alpha = settings.alpha;
    let mut x = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut rhs = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];
    let mut st = vec![0.0; m];

    let mut ax = vec![0.0; m];
    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];

    let residuals = |x: &[f64], s: &[f64], y: &[f64], ax: &mut [f64], px: &mut [f64], aty: &mut [f64]| {
        a_mul(&sc.a, x, ax);
        p_mul(&sc.p, x, px);
        at_mul(&sc.a, y, aty);
        let mut rp = 0.0f64;
        let (mut nax, mut ns, mut nb) = (0.0f64, 0.0f64, 0.0f64);
        for r in 0..m {
            let ie = 1.0 / sc.e[r];
            rp = rp.max(((ax[r] + s[r] - sc.b[r]) * ie).abs());
            nax = nax.max((ax[r] * ie).abs());
            ns = ns.max((s[r] * ie).abs());
            nb = nb.max((sc.b[r] * ie).abs());
        }
        let mut rd = 0.0f64;
        let (mut npx, mut nq, mut naty) = (0.0f64, 0.0f64, 0.0f64);
        let ic = 1.0 / sc.c;
        for j in 0..n {
            let f = ic / sc.d[j];
            rd = rd.max(((px[j] + sc.q[j] - aty[j]) * f).abs());
            npx = npx.max((px[j] * f).abs());
            nq = nq.max((sc.q[j] * f).abs());
            naty = naty.max((aty[j] * f).abs());
        }
        Residuals {
            primal: rp,
            dual: rd,
            primal_scale: nax.max(ns).max(nb),
            dual_scale: npx.max(nq).max(naty),
        }
    };

    // fixed-point state z = (x, s, v) with v = y/ρ_r
    let dim = n + 2 * m;
    let mut z = vec![0.0; dim];
    let mut f = vec![0.0; dim];
    let mut aa = Anderson::new(settings.anderson_memory);
    let mut accelerated = false;
    let mut prev_plain: Option<(Vec<f64>, f64)> = None;
    // a check skipped by a rejected extrapolation happens on the next step
    let mut check_due = false;

    let mut status = Status::MaxIterations;
    let mut iterations = settings.max_iter;
    let mut last = None;
    for k in 1..=settings.max_iter {
        // F(z): one relaxed ADMM step
        {
            let (zx, rest) = z.split_at(n);
            let (zs, zv) = rest.split_at(m);
            for r in 0..m {
                let rr = rho * row_weight[r];
                tmp_m[r] = rr * (sc.b[r] - zs[r] + zv[r]);
            }
            at_mul(&sc.a, &tmp_m, &mut tmp_n);
            for j in 0..n {
                rhs[j] = sigma * zx[j] - sc.q[j] + tmp_n[j];
            }
            kkt.solve(&mut rhs);
            a_mul(&sc.a, &rhs, &mut st);
            let (fx, frest) = f.split_at_mut(n);
            let (fs, fv) = frest.split_at_mut(m);
            for j in 0..n {
                fx[j] = alpha * rhs[j] + (1.0 - alpha) * zx[j];
            }
            for r in 0..m {
                let relaxed = alpha * (sc.b[r] - st[r]) + (1.0 - alpha) * zs[r];
                tmp_m[r] = relaxed;
                fs[r] = relaxed + zv[r];
            }
            project(&problem.cones, fs);
            for r in 0..m {
                fv[r] = zv[r] + tmp_m[r] - fs[r];
            }
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite { iteration: k });
        }
        let g: Vec<f64> = f.iter().zip(&z).map(|(a, b)| a - b).collect();
        let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if accelerated {
            if let Some((pf, pn)) = &prev_plain {
                if g_norm > SAFEGUARD * pn {
                    // extrapolation made things worse: fall back to the plain step
                    z.copy_from_slice(pf);
                    aa.reset();
                    accelerated = false;
                    check_due |= k % settings.check_interval == 0;
                    continue;
                }
            }
        }

        let check = check_due || k % settings.check_interval == 0 || k == settings.max_iter;
        check_due = false;
        let adapt = settings.adaptive_rho && k % settings.adaptive_rho_interval == 0;
        let mut rho_changed = false;
        if check || adapt {
            x.copy_from_slice(&f[..n]);
            s.copy_from_slice(&f[n..n + m]);
            for r in 0..m {
                y[r] = f[n + m + r] * rho * row_weight[r];
            }
            let res = residuals(&x, &s, &y, &mut ax, &mut px, &mut aty);
            let converged = res.primal <= settings.eps_abs + settings.eps_rel * res.primal_scale
                && res.dual <= settings.eps_abs + settings.eps_rel * res.dual_scale;
            if converged {
                status = Status::Solved;
                iterations = k;
                last = Some(res);
                break;
            }
            if adapt {
                let pr = res.primal / res.primal_scale.max(1e-30);
                let dr = res.dual / res.dual_scale.max(1e-30);
                if pr > 0.0 && dr > 0.0 {
                    let new_rho = (rho * (pr / dr).sqrt()).clamp(1e-6, 1e6);
                    if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                        // keep y fixed across the change: v = y/ρ_r
                        for r in 0..m {
                            f[n + m + r] *= rho / new_rho;
                        }
                        rho = new_rho;
                        kkt.factor(rho)?;
                        rho_changed = true;
                    }
                }
            }
            last = Some(res);
        }
        if rho_changed || settings.anderson_memory == 0 {
            aa.reset();
            z.copy_from_slice(&f);
            accelerated = false;
            prev_plain = None;
        } else {
            prev_plain = Some((f.clone(), g_norm));
            z = aa.extrapolate(&f, &g);
            accelerated = true;
        }
    }
    if status == Status::MaxIterations {
        x.copy_from_slice(&f[..n]);
        s.copy_from_slice(&f[n..n + m]);
        for r in 0..m {
            y[r] = f[n + m + r] * rho * row_weight[r];
        }
        last = None;
    }
    let res = match last {
        Some(r) => r,
        None => residuals(&x, &s, &y, &mut ax, &mut px, &mut aty),
    };

    let x_out: Vec<f64> = x.iter().zip(&sc.d).map(|(v, d)| v * d).collect();
    let s_out: Vec<f64> = s.iter().zip(&sc.e).map(|(v, e)| v / e).collect();
    // the splitting multiplier lives in the polar cone
    let y_out: Vec<f64> = y.iter().zip(&sc.e).map(|(v, e)| -v * e / sc.c).collect();
    let objective = problem.objective(&x_out);
    Ok(Solution {
        x: x_out,
        s: s_out,
        y: y_out,
        status,
        iterations,
        primal_residual: res.primal,
        dual_residual: res.dual,
        objective,
    })
}
