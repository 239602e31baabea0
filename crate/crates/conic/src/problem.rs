//! Problem assembly.
//!
//! Solved form:
//!
//! ```text
//! minimize    ½ xᵀPx + qᵀx + offset
//! subject to  b − Ax ∈ K
//! ```
//!
//! `P` is only ever built from sums of squared affine forms, so it is stored as
//! dense blocks over groups of variables that are coupled by some form.

use crate::cone::Cone;
use crate::error::ConicError;
use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

/// `constant + Σ coeff·x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(index: usize, coeff: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(index, coeff)],
        }
    }

    pub fn with_term(mut self, index: usize, coeff: f64) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }
}

/// A dense block of `P` restricted to `vars`.
#[derive(Debug, Clone)]
pub(crate) struct DenseBlock {
    pub vars: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

/// An assembled cone program.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub(crate) n_vars: usize,
    pub(crate) p_blocks: Vec<DenseBlock>,
    pub(crate) q: Vec<f64>,
    pub(crate) offset: f64,
    pub(crate) a: CsrMatrix<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    /// `½ xᵀPx + qᵀx + offset`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n_vars];
        self.p_mul(x, &mut px);
        let quad: f64 = x.iter().zip(&px).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.q).map(|(a, b)| a * b).sum();
        0.5 * quad + lin + self.offset
    }

    /// `out = P x`.
    pub(crate) fn p_mul(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|e| *e = 0.0);
        for blk in &self.p_blocks {
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
}

/// Incremental builder for [`ConicProblem`].
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    n_vars: usize,
    q: Vec<f64>,
    offset: f64,
    squares: Vec<(f64, AffineExpr)>,
    rows: Vec<AffineExpr>,
    cones: Vec<Cone>,
}

impl ProblemBuilder {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            q: vec![0.0; n_vars],
            offset: 0.0,
            squares: Vec::new(),
            rows: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Adds `coeff·x[var]` to the objective.
    pub fn add_linear_cost(&mut self, var: usize, coeff: f64) {
        self.q[var] += coeff;
    }

    /// Adds a constant to the objective.
    pub fn add_cost_offset(&mut self, c: f64) {
        self.offset += c;
    }

    /// Adds `weight · expr(x)²` to the objective (`weight ≥ 0`).
    pub fn add_squared(&mut self, weight: f64, expr: AffineExpr) {
        if weight != 0.0 && !expr.terms.is_empty() {
            self.squares.push((weight, expr));
        } else {
            self.offset += weight * expr.constant * expr.constant;
        }
    }

    /// Requires the vector `(exprs[0](x), …, exprs[d-1](x))` to lie in `cone`.
    pub fn add_cone(&mut self, cone: Cone, exprs: Vec<AffineExpr>) -> Result<(), ConicError> {
        if exprs.len() != cone.dim() {
            return Err(ConicError::DimensionMismatch {
                what: "cone block",
                expected: cone.dim(),
                found: exprs.len(),
            });
        }
        if cone.dim() == 0 {
            return Ok(());
        }
        for e in &exprs {
            if let Some(&(j, _)) = e.terms.iter().find(|(j, _)| *j >= self.n_vars) {
                return Err(ConicError::VariableOutOfRange { index: j, n_vars: self.n_vars });
            }
        }
        self.rows.extend(exprs);
        self.cones.push(cone);
        Ok(())
    }

    pub fn build(self) -> Result<ConicProblem, ConicError> {
        let n = self.n_vars;
        let mut q = self.q;
        let mut offset = self.offset;

        // group variables coupled through a squared form
        let mut uf = UnionFind::new(n);
        for (_, e) in &self.squares {
            if let Some(&(j0, _)) = e.terms.first() {
                if j0 >= n {
                    return Err(ConicError::VariableOutOfRange { index: j0, n_vars: n });
                }
                for &(j, _) in &e.terms[1..] {
                    if j >= n {
                        return Err(ConicError::VariableOutOfRange { index: j, n_vars: n });
                    }
                    uf.union(j0, j);
                }
            }
        }
        let mut in_p = vec![false; n];
        for (_, e) in &self.squares {
            for &(j, _) in &e.terms {
                in_p[j] = true;
            }
        }
        let mut block_of_root = std::collections::HashMap::new();
        let mut blocks: Vec<DenseBlock> = Vec::new();
        let mut local = vec![usize::MAX; n];
        for j in 0..n {
            if !in_p[j] {
                continue;
            }
            let r = uf.find(j);
            let bi = *block_of_root.entry(r).or_insert_with(|| {
                blocks.push(DenseBlock {
                    vars: Vec::new(),
                    matrix: DMatrix::zeros(0, 0),
                });
                blocks.len() - 1
            });
            local[j] = blocks[bi].vars.len();
            blocks[bi].vars.push(j);
        }
        for blk in &mut blocks {
            let k = blk.vars.len();
            blk.matrix = DMatrix::zeros(k, k);
        }
        for (w, e) in &self.squares {
            let bi = block_of_root[&uf.find(e.terms[0].0)];
            let blk = &mut blocks[bi];
            for &(i, ci) in &e.terms {
                q[i] += 2.0 * w * e.constant * ci;
                let li = local[i];
                for &(j, cj) in &e.terms {
                    blk.matrix[(li, local[j])] += 2.0 * w * ci * cj;
                }
            }
            offset += w * e.constant * e.constant;
        }

        let m = self.rows.len();
        let mut coo = CooMatrix::new(m, n);
        let mut b = Vec::with_capacity(m);
        for (r, e) in self.rows.iter().enumerate() {
            for &(j, c) in &e.terms {
                if c != 0.0 {
                    coo.push(r, j, -c);
                }
            }
            b.push(e.constant);
        }
        Ok(ConicProblem {
            n_vars: n,
            p_blocks: blocks,
            q,
            offset,
            a: CsrMatrix::from(&coo),
            b,
            cones: self.cones,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
