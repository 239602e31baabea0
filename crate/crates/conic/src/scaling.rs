//! Ruiz equilibration and sparse products shared by both solvers.
//!
//! The scaled problem has `P̂ = cDPD`, `q̂ = cDq`, `Â = EAD`, `b̂ = Eb`, with
//! `E` constant within every second-order and PSD block so the cones are
//! preserved.

use crate::problem::{ConicProblem, DenseBlock};
use nalgebra_sparse::CsrMatrix;

pub(crate) struct Scaled {
    pub p: Vec<DenseBlock>,
    pub q: Vec<f64>,
    pub a: CsrMatrix<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
}

fn clamp_norm(v: f64) -> f64 {
    if v < 1e-4 {
        1.0
    } else {
        v.min(1e4)
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn ruiz(problem: &ConicProblem, iters: usize) -> Scaled {
    let n = problem.n_vars;
    let m = problem.b.len();
    let mut p = problem.p_blocks.clone();
    let mut q = problem.q.clone();
    let mut a = problem.a.clone();
    let mut b = problem.b.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;

    for _ in 0..iters {
        let mut col = vec![0.0f64; n];
        let mut row = vec![0.0f64; m];
        for blk in &p {
            for (lj, &j) in blk.vars.iter().enumerate() {
                for li in 0..blk.vars.len() {
                    col[j] = col[j].max(blk.matrix[(li, lj)].abs());
                }
            }
        }
        {
            let (offs, cols, vals) = a.csr_data();
            for r in 0..m {
                for k in offs[r]..offs[r + 1] {
                    let v = vals[k].abs();
                    col[cols[k]] = col[cols[k]].max(v);
                    row[r] = row[r].max(v);
                }
            }
        }
        let delta: Vec<f64> = col.iter().map(|&v| 1.0 / clamp_norm(v).sqrt()).collect();
        let mut eps: Vec<f64> = row.iter().map(|&v| 1.0 / clamp_norm(v).sqrt()).collect();
        let mut start = 0;
        for cone in &problem.cones {
            let k = cone.dim();
            if cone.needs_uniform_scaling() {
                let mean = eps[start..start + k].iter().sum::<f64>() / k as f64;
                eps[start..start + k].iter_mut().for_each(|x| *x = mean);
            }
            start += k;
        }

        for blk in &mut p {
            for (lj, &j) in blk.vars.iter().enumerate() {
                for (li, &i) in blk.vars.iter().enumerate() {
                    blk.matrix[(li, lj)] *= delta[i] * delta[j];
                }
            }
        }
        q.iter_mut().zip(&delta).for_each(|(x, s)| *x *= s);
        {
            let (offs, cols, vals) = a.csr_data_mut();
            for r in 0..m {
                for k in offs[r]..offs[r + 1] {
                    vals[k] *= eps[r] * delta[cols[k]];
                }
            }
        }
        b.iter_mut().zip(&eps).for_each(|(x, s)| *x *= s);
        d.iter_mut().zip(&delta).for_each(|(x, s)| *x *= s);
        e.iter_mut().zip(&eps).for_each(|(x, s)| *x *= s);

        // cost scaling
        let mut pcol = vec![0.0f64; n];
        for blk in &p {
            for (lj, &j) in blk.vars.iter().enumerate() {
                for li in 0..blk.vars.len() {
                    pcol[j] = pcol[j].max(blk.matrix[(li, lj)].abs());
                }
            }
        }
        let mean_p = if n > 0 { pcol.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let gamma = 1.0 / clamp_norm(mean_p.max(inf_norm(&q)));
        for blk in &mut p {
            blk.matrix *= gamma;
        }
        q.iter_mut().for_each(|x| *x *= gamma);
        c *= gamma;
    }
    Scaled { p, q, a, b, d, e, c }
}

pub(crate) fn p_mul(blocks: &[DenseBlock], x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|e| *e = 0.0);
    for blk in blocks {
        for (lj, &j) in blk.vars.iter().enumerate() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (li, &i) in blk.vars.iter().enumerate() {
                out[i] += blk.matrix[(li, lj)] * xj;
            }
        }
    }
}

pub(crate) fn a_mul(a: &CsrMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let (offs, cols, vals) = a.csr_data();
    for (r, o) in out.iter_mut().enumerate() {
        *o = (offs[r]..offs[r + 1]).map(|k| vals[k] * x[cols[k]]).sum();
    }
}

pub(crate) fn at_mul(a: &CsrMatrix<f64>, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|e| *e = 0.0);
    let (offs, cols, vals) = a.csr_data();
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        for k in offs[r]..offs[r + 1] {
            out[cols[k]] += vals[k] * yr;
        }
    }
}
