//! Primal-dual interior-point solver.
//!
//! Infeasible-start path following with Nesterov–Todd scaling and a Mehrotra
//! predictor-corrector. Equality rows (zero cones) are eliminated through a
//! Schur complement; the reduced system `P + Gᵀ(WᵀW)⁻¹G` is formed densely and
//! factored by Cholesky, followed by a few passes of iterative refinement on
//! the full Newton system.

use crate::admm::{Solution, Status};
use crate::cone::{mat_to_svec, svec_index, svec_scale, svec_to_mat, Cone};
use crate::error::ConicError;
use crate::problem::{ConicProblem, DenseBlock};
use crate::scaling::{p_mul, ruiz};
use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct IpmSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub scaling_iters: usize,
    /// Fraction of the distance to the cone boundary taken by each step.
    pub step_fraction: f64,
    /// Iterative-refinement passes per Newton solve.
    pub refinement_steps: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            max_iter: 100,
            scaling_iters: 10,
            step_fraction: 0.99,
            refinement_steps: 2,
        }
    }
}

impl IpmSettings {
    fn validate(&self) -> Result<(), ConicError> {
        let bad = |m: &str| Err(ConicError::InvalidSettings(m.to_string()));
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return bad("step_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy)]
enum Kind {
    Nonneg,
    Soc,
    Psd(usize),
}

#[derive(Debug)]
struct Block {
    kind: Kind,
    start: usize,
    dim: usize,
    /// Variables touching the block, ascending, each with its (local row, coefficient) entries.
    cols: Vec<(usize, SparseRow)>,
    /// `(i, j, svec scale)` for every local row of a PSD block.
    pairs: Vec<(usize, usize, f64)>,
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }
}

/// Nesterov–Todd scaling of one block.
#[derive(Debug, Clone)]
enum Scaling {
    Nonneg { w: Vec<f64> },
    /// `W = β(2vvᵀ − J)` with `vᵀJv = 1`.
    Soc { beta: f64, v: Vec<f64> },
    /// `W(U) = rᵀUr`, `rti = r⁻ᵀ`.
    Psd { r: DMatrix<f64>, rti: DMatrix<f64> },
}

#[derive(Debug, Clone, Copy)]
enum Op {
    W,
    Wt,
    Winv,
    Wit,
}

impl Scaling {
    fn identity(block: &Block) -> Self {
        match block.kind {
            Kind::Nonneg => Scaling::Nonneg { w: vec![1.0; block.dim] },
            Kind::Soc => {
                let mut v = vec![0.0; block.dim];
                v[0] = 1.0;
                Scaling::Soc { beta: 1.0, v }
            }
            Kind::Psd(m) => Scaling::Psd { r: DMatrix::identity(m, m), rti: DMatrix::identity(m, m) },
        }
    }

    /// Scaling and scaled point `λ = Wz = W⁻ᵀs`; `None` if `s` or `z` is not interior.
    fn compute(kind: Kind, s: &[f64], z: &[f64]) -> Option<(Self, Vec<f64>)> {
        let sc = match kind {
            Kind::Nonneg => {
                if s.iter().chain(z).any(|&v| !(v > 0.0)) {
                    return None;
                }
                Scaling::Nonneg { w: s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect() }
            }
            Kind::Soc => {
                let aa = jnorm(s)?;
                let bb = jnorm(z)?;
                let dot = s.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / (aa * bb);
                let gamma = ((1.0 + dot) / 2.0).sqrt();
                let mut w: Vec<f64> = s.iter().zip(z).map(|(a, b)| a / aa - b / bb).collect();
                w[0] = s[0] / aa + z[0] / bb;
                w.iter_mut().for_each(|x| *x /= 2.0 * gamma);
                w[0] += 1.0;
                let f = (2.0 * w[0]).sqrt();
                w.iter_mut().for_each(|x| *x /= f);
                Scaling::Soc { beta: (aa / bb).sqrt(), v: w }
            }
            Kind::Psd(m) => {
                let ls = svec_to_mat(s, m).cholesky()?.unpack();
                let lz = svec_to_mat(z, m).cholesky()?.unpack();
                let svd = (lz.transpose() * &ls).svd(true, true);
                let u = svd.u?;
                let v = svd.v_t?.transpose();
                if svd.singular_values.iter().any(|&l| !(l > 0.0)) {
                    return None;
                }
                let isq = DMatrix::from_diagonal(&svd.singular_values.map(|l| 1.0 / l.sqrt()));
                Scaling::Psd { r: ls * v * &isq, rti: lz * u * isq }
            }
        };
        let mut lam = vec![0.0; z.len()];
        sc.apply(Op::W, z, &mut lam);
        if let (Kind::Psd(m), Scaling::Psd { .. }) = (kind, &sc) {
            // exactly diagonal in theory; drop the round-off
            for j in 0..m {
                for i in j + 1..m {
                    lam[svec_index(i, j, m)] = 0.0;
                }
            }
        }
        Some((sc, lam))
    }

    fn apply(&self, op: Op, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w } => {
                for ((o, x), w) in out.iter_mut().zip(u).zip(w) {
                    *o = match op {
                        Op::W | Op::Wt => x * w,
                        Op::Winv | Op::Wit => x / w,
                    };
                }
            }
            Scaling::Soc { beta, v } => {
                // both W and W⁻¹ are symmetric
                match op {
                    Op::W | Op::Wt => {
                        let vu: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                        for (k, o) in out.iter_mut().enumerate() {
                            let ju = if k == 0 { u[0] } else { -u[k] };
                            *o = beta * (2.0 * v[k] * vu - ju);
                        }
                    }
                    Op::Winv | Op::Wit => {
                        let vju: f64 = v[0] * u[0] - v[1..].iter().zip(&u[1..]).map(|(a, b)| a * b).sum::<f64>();
                        for (k, o) in out.iter_mut().enumerate() {
                            let (jv, ju) = if k == 0 { (v[0], u[0]) } else { (-v[k], -u[k]) };
                            *o = (2.0 * jv * vju - ju) / beta;
                        }
                    }
                }
            }
            Scaling::Psd { r, rti } => {
                let m = r.nrows();
                let x = svec_to_mat(u, m);
                let y = match op {
                    Op::W => r.transpose() * x * r,
                    Op::Wt => r * x * r.transpose(),
                    Op::Winv => rti * x * rti.transpose(),
                    Op::Wit => rti.transpose() * x * rti,
                };
                mat_to_svec(&y, out);
            }
        }
    }
}

/// `√(x₀² − ‖x₁‖²)` for a point strictly inside the second-order cone.
fn jnorm(x: &[f64]) -> Option<f64> {
    let tail: f64 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(x[0] > tail) {
        return None;
    }
    Some(((x[0] - tail) * (x[0] + tail)).sqrt())
}

/// Jordan product `a ∘ b`.
fn jprod(kind: Kind, a: &[f64], b: &[f64], out: &mut [f64]) {
    match kind {
        Kind::Nonneg => out.iter_mut().zip(a.iter().zip(b)).for_each(|(o, (x, y))| *o = x * y),
        Kind::Soc => {
            out[0] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            for k in 1..a.len() {
                out[k] = a[0] * b[k] + b[0] * a[k];
            }
        }
        Kind::Psd(m) => {
            let x = svec_to_mat(a, m);
            let y = svec_to_mat(b, m);
            let p = &x * &y;
            mat_to_svec(&((&p + p.transpose()) * 0.5), out);
        }
    }
}

/// Solves `λ ∘ x = r` for `x`.
fn jdiv(kind: Kind, lam: &[f64], r: &[f64], out: &mut [f64]) {
    match kind {
        Kind::Nonneg => out.iter_mut().zip(r.iter().zip(lam)).for_each(|(o, (x, l))| *o = x / l),
        Kind::Soc => {
            let det = lam[0] * lam[0] - lam[1..].iter().map(|v| v * v).sum::<f64>();
            let l1r1: f64 = lam[1..].iter().zip(&r[1..]).map(|(a, b)| a * b).sum();
            let x0 = (lam[0] * r[0] - l1r1) / det;
            out[0] = x0;
            for k in 1..lam.len() {
                out[k] = (r[k] - x0 * lam[k]) / lam[0];
            }
        }
        Kind::Psd(m) => {
            for j in 0..m {
                let lj = lam[svec_index(j, j, m)];
                for i in j..m {
                    let li = lam[svec_index(i, i, m)];
                    let k = svec_index(i, j, m);
                    out[k] = 2.0 * r[k] / (li + lj);
                }
            }
        }
    }
}

fn identity_into(kind: Kind, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    match kind {
        Kind::Nonneg => out.iter_mut().for_each(|v| *v = 1.0),
        Kind::Soc => out[0] = 1.0,
        Kind::Psd(m) => (0..m).for_each(|i| out[svec_index(i, i, m)] = 1.0),
    }
}

/// Largest `α` with `x + α·e` in the cone, i.e. how far `x` is outside
/// (negative when strictly inside).
fn boundary_shift(kind: Kind, x: &[f64]) -> f64 {
    match kind {
        Kind::Nonneg => -x.iter().cloned().fold(f64::INFINITY, f64::min),
        Kind::Soc => x[1..].iter().map(|v| v * v).sum::<f64>().sqrt() - x[0],
        Kind::Psd(m) => -SymmetricEigen::new(svec_to_mat(x, m)).eigenvalues.min(),
    }
}

/// Largest step `α` keeping `λ + α·d` in the cone, for `λ` strictly inside
/// (and diagonal for PSD blocks).
fn max_step(kind: Kind, lam: &[f64], d: &[f64]) -> f64 {
    match kind {
        Kind::Nonneg => lam
            .iter()
            .zip(d)
            .filter(|(_, &di)| di < 0.0)
            .map(|(l, di)| -l / di)
            .fold(f64::INFINITY, f64::min),
        Kind::Soc => {
            let a = d[0] * d[0] - d[1..].iter().map(|v| v * v).sum::<f64>();
            let b = 2.0 * (lam[0] * d[0] - lam[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
            let c = lam[0] * lam[0] - lam[1..].iter().map(|v| v * v).sum::<f64>();
            smallest_positive_root(a, b, c)
        }
        Kind::Psd(m) => {
            let isq: Vec<f64> = (0..m).map(|i| 1.0 / lam[svec_index(i, i, m)].sqrt()).collect();
            let mut x = svec_to_mat(d, m);
            for j in 0..m {
                for i in 0..m {
                    x[(i, j)] *= isq[i] * isq[j];
                }
            }
            let min = SymmetricEigen::new(x).eigenvalues.min();
            if min < 0.0 {
                -1.0 / min
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Smallest positive root of `aα² + bα + c` with `c > 0`, or ∞.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-14 * scale {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut best = f64::INFINITY;
    for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if root > 0.0 {
            best = best.min(root);
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rows_mul(rows: &[SparseRow], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(rows) {
        *o = row.iter().map(|&(j, v)| v * x[j]).sum();
    }
}

fn rows_tmul(rows: &[SparseRow], y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (row, &yr) in rows.iter().zip(y) {
        if yr != 0.0 {
            for &(j, v) in row {
                out[j] += v * yr;
            }
        }
    }
}

/// Scaled problem `min ½xᵀPx + qᵀx  s.t.  Ex = f,  Gx + s = h,  s ∈ K`.
struct Model {
    n: usize,
    p: Vec<DenseBlock>,
    q: Vec<f64>,
    e: Vec<SparseRow>,
    f: Vec<f64>,
    g: Vec<SparseRow>,
    h: Vec<f64>,
    blocks: Vec<Block>,
    /// Original row of each equality and each cone row.
    eq_rows: Vec<usize>,
    cone_rows: Vec<usize>,
    /// Barrier degree.
    degree: usize,
}

impl Model {
    fn new(n: usize, p: Vec<DenseBlock>, q: Vec<f64>, a: &nalgebra_sparse::CsrMatrix<f64>, b: &[f64], cones: &[Cone]) -> Self {
        let (offs, cols, vals) = a.csr_data();
        let row = |r: usize| -> SparseRow { (offs[r]..offs[r + 1]).map(|k| (cols[k], vals[k])).collect() };
        let mut model = Model {
            n,
            p,
            q,
            e: Vec::new(),
            f: Vec::new(),
            g: Vec::new(),
            h: Vec::new(),
            blocks: Vec::new(),
            eq_rows: Vec::new(),
            cone_rows: Vec::new(),
            degree: 0,
        };
        let mut start = 0;
        for cone in cones {
            let d = cone.dim();
            let kind = match *cone {
                Cone::Zero(_) => {
                    for r in start..start + d {
                        model.e.push(row(r));
                        model.f.push(b[r]);
                        model.eq_rows.push(r);
                    }
                    start += d;
                    continue;
                }
                Cone::Nonnegative(_) => Kind::Nonneg,
                Cone::SecondOrder(_) => Kind::Soc,
                Cone::Psd(m) => Kind::Psd(m),
            };
            start += d;
            if d == 0 {
                continue;
            }
            let gstart = model.g.len();
            let mut by_var: std::collections::BTreeMap<usize, SparseRow> = Default::default();
            for (local, r) in (start - d..start).enumerate() {
                let rw = row(r);
                for &(j, v) in &rw {
                    by_var.entry(j).or_default().push((local, v));
                }
                model.g.push(rw);
                model.h.push(b[r]);
                model.cone_rows.push(r);
            }
            let pairs = match kind {
                Kind::Psd(m) => {
                    let mut pairs = vec![(0, 0, 0.0); d];
                    for j in 0..m {
                        for i in j..m {
                            pairs[svec_index(i, j, m)] = (i, j, svec_scale(i, j));
                        }
                    }
                    pairs
                }
                _ => Vec::new(),
            };
            model.degree += match kind {
                Kind::Nonneg => d,
                Kind::Soc => 1,
                Kind::Psd(m) => m,
            };
            model.blocks.push(Block { kind, start: gstart, dim: d, cols: by_var.into_iter().collect(), pairs });
        }
        model
    }

    fn mg(&self) -> usize {
        self.g.len()
    }

    /// Dense lower triangle of `P + Gᵀ(WᵀW)⁻¹G + δI`.
    fn assemble(&self, scalings: &[Scaling], delta: f64) -> Mat<f64> {
        let n = self.n;
        let mut k = Mat::<f64>::zeros(n, n);
        for blk in &self.p {
            for (lj, &j) in blk.vars.iter().enumerate() {
                for (li, &i) in blk.vars.iter().enumerate() {
                    if i >= j {
                        k[(i, j)] += blk.matrix[(li, lj)];
                    }
                }
            }
        }
        let add_outer = |k: &mut Mat<f64>, row: &[(usize, f64)], w: f64| {
            for &(i, a) in row {
                for &(j, b) in row {
                    if i >= j {
                        k[(i, j)] += w * a * b;
                    }
                }
            }
        };
        for (block, sc) in self.blocks.iter().zip(scalings) {
            let rows = &self.g[block.range()];
            match sc {
                Scaling::Nonneg { w } => {
                    for (row, wi) in rows.iter().zip(w) {
                        add_outer(&mut k, row, 1.0 / (wi * wi));
                    }
                }
                Scaling::Soc { beta, v } => {
                    // (WᵀW)⁻¹ = β⁻²(I + 4‖v‖²uuᵀ − 2uvᵀ − 2vuᵀ), u = Jv
                    let ib2 = 1.0 / (beta * beta);
                    for row in rows {
                        add_outer(&mut k, row, ib2);
                    }
                    let vv = dot(v, v);
                    let gu: Vec<(usize, f64, f64)> = block
                        .cols
                        .iter()
                        .map(|(j, entries)| {
                            let (mut a, mut c) = (0.0, 0.0);
                            for &(r, g) in entries {
                                a += g * if r == 0 { v[0] } else { -v[r] };
                                c += g * v[r];
                            }
                            (*j, a, c)
                        })
                        .collect();
                    for &(i, ai, ci) in &gu {
                        for &(j, aj, cj) in &gu {
                            if i >= j {
                                k[(i, j)] += ib2 * (4.0 * vv * ai * aj - 2.0 * ai * cj - 2.0 * ci * aj);
                            }
                        }
                    }
                }
                Scaling::Psd { rti, .. } => {
                    let mm = rti * rti.transpose();
                    let h = |p: usize, q: usize| {
                        let (i, j, si) = block.pairs[p];
                        let (a, b, sj) = block.pairs[q];
                        0.5 * si * sj * (mm[(i, a)] * mm[(j, b)] + mm[(i, b)] * mm[(j, a)])
                    };
                    for (ia, (va, ea)) in block.cols.iter().enumerate() {
                        for (vb, eb) in &block.cols[..=ia] {
                            let mut acc = 0.0;
                            for &(p, ga) in ea {
                                for &(q, gb) in eb {
                                    acc += ga * gb * h(p, q);
                                }
                            }
                            k[(*va, *vb)] += acc;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            k[(i, i)] += delta;
        }
        k
    }
}

/// Cholesky of `k` with a relative diagonal perturbation, growing it (and
/// finally adding an absolute one) until the factorization succeeds. The
/// perturbation is removed again by iterative refinement.
fn regularized_llt(k: Mat<f64>) -> Result<Llt<f64>, ConicError> {
    let n = k.nrows();
    let top = (0..n).map(|i| k[(i, i)]).fold(0.0, f64::max);
    let mut rel = 1e-14;
    let mut abs = 0.0;
    for _ in 0..8 {
        let mut t = k.clone();
        for i in 0..n {
            t[(i, i)] += rel * t[(i, i)] + abs;
        }
        if let Ok(l) = t.llt(Side::Lower) {
            return Ok(l);
        }
        rel *= 100.0;
        abs = if abs == 0.0 { 1e-14 * top.max(1e-300) } else { abs * 100.0 };
    }
    Err(ConicError::Factorization { block_size: n })
}

/// Factored Newton system for one scaling.
struct Newton<'a> {
    model: &'a Model,
    scalings: &'a [Scaling],
    lam: &'a [f64],
    llt: Llt<f64>,
    /// Cholesky of the equality Schur complement `E K⁻¹ Eᵀ`, with `K⁻¹Eᵀ`.
    schur: Option<(Llt<f64>, Mat<f64>)>,
}

struct Step {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    /// `W·dz` and `W⁻ᵀ·ds`.
    dzt: Vec<f64>,
    dst: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(model: &'a Model, scalings: &'a [Scaling], lam: &'a [f64]) -> Result<Self, ConicError> {
        let n = model.n;
        let llt = regularized_llt(model.assemble(scalings, 0.0))?;
        let me = model.e.len();
        let schur = if me > 0 {
            let mut ket = Mat::<f64>::zeros(n, me);
            for (r, row) in model.e.iter().enumerate() {
                for &(j, v) in row {
                    ket[(j, r)] += v;
                }
            }
            llt.solve_in_place(ket.as_mut());
            let mut s = Mat::<f64>::zeros(me, me);
            for (r, row) in model.e.iter().enumerate() {
                for c in 0..me {
                    s[(r, c)] = row.iter().map(|&(j, v)| v * ket[(j, c)]).sum();
                }
            }
            let sl = regularized_llt(s)?;
            Some((sl, ket))
        } else {
            None
        };
        Ok(Self { model, scalings, lam, llt, schur })
    }

    fn each_block(&self, mut f: impl FnMut(&Block, &Scaling, std::ops::Range<usize>)) {
        for (b, s) in self.model.blocks.iter().zip(self.scalings) {
            f(b, s, b.range());
        }
    }

    /// One solve of the linearised system, without refinement.
    fn solve_once(&self, bx: &[f64], by: &[f64], bz: &[f64], rc: &[f64]) -> Step {
        let model = self.model;
        let n = model.n;
        let mg = model.mg();
        let mut t = vec![0.0; mg];
        let mut bzt = bz.to_vec();
        let mut u = vec![0.0; mg];
        let mut tmp = vec![0.0; mg];
        self.each_block(|b, s, r| {
            jdiv(b.kind, &self.lam[r.clone()], &rc[r.clone()], &mut t[r.clone()]);
            s.apply(Op::Wt, &t[r.clone()], &mut tmp[r.clone()]);
            for i in r.clone() {
                bzt[i] -= tmp[i];
            }
            s.apply(Op::Wit, &bzt[r.clone()], &mut tmp[r.clone()]);
            s.apply(Op::Winv, &tmp[r.clone()], &mut u[r]);
        });
        let mut rhs = vec![0.0; n];
        rows_tmul(&model.g, &u, &mut rhs);
        rhs.iter_mut().zip(bx).for_each(|(a, b)| *a += b);

        let mut col = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(col.as_mut());
        let mut dy = vec![0.0; model.e.len()];
        if let Some((sl, ket)) = &self.schur {
            let me = dy.len();
            let mut sy = Mat::<f64>::from_fn(me, 1, |r, _| {
                model.e[r].iter().map(|&(j, v)| v * col[(j, 0)]).sum::<f64>() - by[r]
            });
            sl.solve_in_place(sy.as_mut());
            for r in 0..me {
                dy[r] = sy[(r, 0)];
            }
            for i in 0..n {
                col[(i, 0)] -= (0..me).map(|r| ket[(i, r)] * dy[r]).sum::<f64>();
            }
        }
        let dx: Vec<f64> = (0..n).map(|i| col[(i, 0)]).collect();

        let mut gdx = vec![0.0; mg];
        rows_mul(&model.g, &dx, &mut gdx);
        let mut dz = vec![0.0; mg];
        let mut dzt = vec![0.0; mg];
        let mut dst = vec![0.0; mg];
        let mut ds = vec![0.0; mg];
        self.each_block(|_, s, r| {
            for i in r.clone() {
                gdx[i] -= bzt[i];
            }
            s.apply(Op::Wit, &gdx[r.clone()], &mut tmp[r.clone()]);
            dzt[r.clone()].copy_from_slice(&tmp[r.clone()]);
            s.apply(Op::Winv, &tmp[r.clone()], &mut dz[r.clone()]);
            for i in r.clone() {
                dst[i] = t[i] - dzt[i];
            }
            s.apply(Op::Wt, &dst[r.clone()], &mut ds[r]);
        });
        Step { dx, dy, dz, ds, dzt, dst }
    }

    fn solve(&self, bx: &[f64], by: &[f64], bz: &[f64], rc: &[f64], refinement: usize) -> Step {
        let model = self.model;
        let n = model.n;
        let mut step = self.solve_once(bx, by, bz, rc);
        let zero = vec![0.0; rc.len()];
        let mut px = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for _ in 0..refinement {
            p_mul(&model.p, &step.dx, &mut px);
            let mut e1 = bx.to_vec();
            rows_tmul(&model.e, &step.dy, &mut tmp);
            for i in 0..n {
                e1[i] -= px[i] + tmp[i];
            }
            rows_tmul(&model.g, &step.dz, &mut tmp);
            e1.iter_mut().zip(&tmp).for_each(|(a, b)| *a -= b);
            let mut e2 = vec![0.0; model.e.len()];
            rows_mul(&model.e, &step.dx, &mut e2);
            e2.iter_mut().zip(by).for_each(|(a, b)| *a = b - *a);
            let mut e3 = vec![0.0; model.mg()];
            rows_mul(&model.g, &step.dx, &mut e3);
            for i in 0..e3.len() {
                e3[i] = bz[i] - e3[i] - step.ds[i];
            }
            let c = self.solve_once(&e1, &e2, &e3, &zero);
            let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            add(&mut step.dx, &c.dx);
            add(&mut step.dy, &c.dy);
            add(&mut step.dz, &c.dz);
            add(&mut step.ds, &c.ds);
            add(&mut step.dzt, &c.dzt);
            add(&mut step.dst, &c.dst);
        }
        step
    }
}

#[derive(Clone)]
struct Measures {
    primal: f64,
    dual: f64,
    primal_scale: f64,
    dual_scale: f64,
    gap: f64,
    objective_scale: f64,
}

/// Solves `problem` with the interior-point method.
///
/// Hitting the iteration limit or losing interiority is not an error: the last
/// iterate is returned with [`Status::MaxIterations`] or [`Status::Stalled`].
pub fn solve(problem: &ConicProblem, settings: &IpmSettings) -> Result<Solution, ConicError> {
    settings.validate()?;
    let n = problem.n_vars;
    let sc = ruiz(problem, settings.scaling_iters);
    let model = Model::new(n, sc.p.clone(), sc.q.clone(), &sc.a, &sc.b, &problem.cones);
    let mg = model.mg();
    let me = model.e.len();

    // starting point: least-squares fit of the constraints, shifted inside the cones
    let identity: Vec<Scaling> = model.blocks.iter().map(Scaling::identity).collect();
    let mut ones = vec![0.0; mg];
    for b in &model.blocks {
        identity_into(b.kind, &mut ones[b.range()]);
    }
    let mq: Vec<f64> = model.q.iter().map(|v| -v).collect();
    let init = Newton::new(&model, &identity, &ones)?.solve(&mq, &model.f, &model.h, &vec![0.0; mg], settings.refinement_steps);
    let mut x = init.dx;
    let mut y = init.dy;
    let mut s = init.ds;
    let mut z: Vec<f64> = s.iter().map(|v| -v).collect();
    for v in [&mut s, &mut z] {
        let shift = model.blocks.iter().map(|b| boundary_shift(b.kind, &v[b.range()])).fold(f64::NEG_INFINITY, f64::max);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if shift >= -1e-8 * norm.max(1.0) {
            v.iter_mut().zip(&ones).for_each(|(a, e)| *a += (1.0 + shift) * e);
        }
    }

    let mut px = vec![0.0; n];
    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; me];
    let mut rz = vec![0.0; mg];
    let mut tmp = vec![0.0; n];
    let mut etz = vec![0.0; n];

    let measure = |x: &[f64], y: &[f64], s: &[f64], z: &[f64], px: &mut [f64], rx: &mut [f64], ry: &mut [f64], rz: &mut [f64], tmp: &mut [f64], etz: &mut [f64]| {
        p_mul(&model.p, x, px);
        rows_tmul(&model.e, y, tmp);
        rows_tmul(&model.g, z, etz);
        let ic = 1.0 / sc.c;
        let (mut dual, mut dual_scale) = (0.0f64, 0.0f64);
        for j in 0..n {
            let aty = tmp[j] + etz[j];
            rx[j] = px[j] + model.q[j] + aty;
            let f = ic / sc.d[j];
            dual = dual.max((rx[j] * f).abs());
            dual_scale = dual_scale.max((px[j] * f).abs()).max((model.q[j] * f).abs()).max((aty * f).abs());
        }
        rows_mul(&model.e, x, ry);
        rows_mul(&model.g, x, rz);
        let (mut primal, mut primal_scale) = (0.0f64, 0.0f64);
        for (r, &orig) in model.eq_rows.iter().enumerate() {
            let ie = 1.0 / sc.e[orig];
            primal_scale = primal_scale.max((ry[r] * ie).abs()).max((model.f[r] * ie).abs());
            ry[r] -= model.f[r];
            primal = primal.max((ry[r] * ie).abs());
        }
        for (r, &orig) in model.cone_rows.iter().enumerate() {
            let ie = 1.0 / sc.e[orig];
            primal_scale = primal_scale.max((rz[r] * ie).abs()).max((s[r] * ie).abs()).max((model.h[r] * ie).abs());
            rz[r] += s[r] - model.h[r];
            primal = primal.max((rz[r] * ie).abs());
        }
        let gap = dot(s, z);
        let pobj = 0.5 * dot(x, px) + dot(&model.q, x);
        let dobj = pobj + dot(y, ry) + dot(z, rz) - gap;
        Measures {
            primal,
            dual,
            primal_scale,
            dual_scale,
            gap: gap * ic,
            objective_scale: pobj.abs().max(dobj.abs()) * ic,
        }
    };

    struct Best {
        score: f64,
        iteration: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        s: Vec<f64>,
        z: Vec<f64>,
        measures: Measures,
    }
    let mut best: Option<Best> = None;
    let mut status = Status::MaxIterations;
    let mut it = 0;
    loop {
        let m = measure(&x, &y, &s, &z, &mut px, &mut rx, &mut ry, &mut rz, &mut tmp, &mut etz);
        if m.primal.is_nan() || m.dual.is_nan() || m.gap.is_nan() {
            return Err(ConicError::NonFinite { iteration: it });
        }
        // worst ratio of a residual to its tolerance
        let score = (m.primal / (settings.eps_abs + settings.eps_rel * m.primal_scale))
            .max(m.dual / (settings.eps_abs + settings.eps_rel * m.dual_scale))
            .max(m.gap / (settings.eps_abs + settings.eps_rel * m.objective_scale));
        let done = score <= 1.0;
        if best.as_ref().is_none_or(|b: &Best| score < b.score) {
            best = Some(Best { score, iteration: it, x: x.clone(), y: y.clone(), s: s.clone(), z: z.clone(), measures: m.clone() });
        }
        if done {
            status = Status::Solved;
            break;
        }
        if it == settings.max_iter {
            break;
        }
        it += 1;

        let mut scalings = Vec::with_capacity(model.blocks.len());
        let mut lam = vec![0.0; mg];
        let mut interior = true;
        for b in &model.blocks {
            match Scaling::compute(b.kind, &s[b.range()], &z[b.range()]) {
                Some((w, l)) => {
                    lam[b.range()].copy_from_slice(&l);
                    scalings.push(w);
                }
                None => {
                    interior = false;
                    break;
                }
            }
        }
        if !interior {
            status = Status::Stalled;
            break;
        }
        let newton = match Newton::new(&model, &scalings, &lam) {
            Ok(nt) => nt,
            Err(_) => {
                status = Status::Stalled;
                break;
            }
        };
        let mu = if model.degree > 0 { dot(&s, &z) / model.degree as f64 } else { 0.0 };
        let bx: Vec<f64> = rx.iter().map(|v| -v).collect();
        let by: Vec<f64> = ry.iter().map(|v| -v).collect();
        let bz: Vec<f64> = rz.iter().map(|v| -v).collect();
        let mut ll = vec![0.0; mg];
        for b in &model.blocks {
            jprod(b.kind, &lam[b.range()], &lam[b.range()], &mut ll[b.range()]);
        }

        // predictor
        let rc: Vec<f64> = ll.iter().map(|v| -v).collect();
        let aff = newton.solve(&bx, &by, &bz, &rc, settings.refinement_steps);
        let alpha_aff = step_length(&model, &lam, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let mut rc = vec![0.0; mg];
        let mut e = vec![0.0; mg];
        for b in &model.blocks {
            let r = b.range();
            jprod(b.kind, &aff.dst[r.clone()], &aff.dzt[r.clone()], &mut rc[r.clone()]);
            identity_into(b.kind, &mut e[r]);
        }
        for i in 0..mg {
            rc[i] = -ll[i] - rc[i] + sigma * mu * e[i];
        }
        let step = newton.solve(&bx, &by, &bz, &rc, settings.refinement_steps);
        let alpha = (settings.step_fraction * step_length(&model, &lam, &step)).min(1.0);
        if !(alpha > 1e-12) {
            status = Status::Stalled;
            break;
        }
        let upd = |v: &mut [f64], d: &[f64]| v.iter_mut().zip(d).for_each(|(a, b)| *a += alpha * b);
        upd(&mut x, &step.dx);
        upd(&mut y, &step.dy);
        upd(&mut s, &step.ds);
        upd(&mut z, &step.dz);
    }
    // on failure, report the iterate closest to meeting the tolerances
    let Best { iteration: iterations, x, y, s, z, measures: last, .. } = best.expect("at least one iterate is measured");

    let x_out: Vec<f64> = x.iter().zip(&sc.d).map(|(v, d)| v * d).collect();
    let m_all = problem.b.len();
    let mut s_out = vec![0.0; m_all];
    let mut y_out = vec![0.0; m_all];
    for (r, &orig) in model.eq_rows.iter().enumerate() {
        y_out[orig] = y[r] * sc.e[orig] / sc.c;
    }
    for (r, &orig) in model.cone_rows.iter().enumerate() {
        s_out[orig] = s[r] / sc.e[orig];
        y_out[orig] = z[r] * sc.e[orig] / sc.c;
    }
    let objective = problem.objective(&x_out);
    Ok(Solution {
        x: x_out,
        s: s_out,
        y: y_out,
        status,
        iterations,
        primal_residual: last.primal,
        dual_residual: last.dual.max(last.gap),
        objective,
    })
}

fn step_length(model: &Model, lam: &[f64], step: &Step) -> f64 {
    model
        .blocks
        .iter()
        .map(|b| {
            let r = b.range();
            max_step(b.kind, &lam[r.clone()], &step.dst[r.clone()]).min(max_step(b.kind, &lam[r.clone()], &step.dzt[r]))
        })
        .fold(f64::INFINITY, f64::min)
}
