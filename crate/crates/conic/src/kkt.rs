//! Factorization of the reduced KKT matrix `P + σI + AᵀRA`.
//!
//! Variables split into connected components of the coupling graph of `P`
//! and `AᵀA`. Each component is factored densely; isolated variables reduce
//! to scalar divisions. The design problems this crate serves have one large
//! coupled block plus many isolated PSD slack variables, so this is far
//! cheaper than a dense factorization of the full matrix.

use crate::error::ConicError;
use crate::problem::{DenseBlock, UnionFind};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::CsrMatrix;

#[derive(Debug, Clone, Copy)]
enum Loc {
    Scalar,
    Block(usize, usize),
}

struct Component {
    vars: Vec<usize>,
    base: DMatrix<f64>,
    ata: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

pub(crate) struct Kkt {
    loc: Vec<Loc>,
    scalar_base: Vec<f64>,
    scalar_ata: Vec<f64>,
    scalar_inv: Vec<f64>,
    comps: Vec<Component>,
}

impl Kkt {
    /// `row_weight[r]` multiplies `ρ` on constraint row `r`.
    pub fn new(
        n: usize,
        p_blocks: &[DenseBlock],
        a: &CsrMatrix<f64>,
        row_weight: &[f64],
        sigma: f64,
    ) -> Self {
        let mut uf = UnionFind::new(n);
        let mut coupled = vec![false; n];
        for blk in p_blocks {
            if blk.vars.len() > 1 {
                for &j in &blk.vars {
                    uf.union(blk.vars[0], j);
                    coupled[j] = true;
                }
            }
        }
        let (offsets, cols, _) = a.csr_data();
        for r in 0..a.nrows() {
            let row = &cols[offsets[r]..offsets[r + 1]];
            if row.len() > 1 {
                for &j in row {
                    uf.union(row[0], j);
                    coupled[j] = true;
                }
            }
        }

        let mut loc = vec![Loc::Scalar; n];
        let mut comp_of_root = std::collections::HashMap::new();
        let mut comps: Vec<Component> = Vec::new();
        for j in 0..n {
            if !coupled[j] {
                continue;
            }
            let r = uf.find(j);
            let ci = *comp_of_root.entry(r).or_insert_with(|| {
                comps.push(Component {
                    vars: Vec::new(),
                    base: DMatrix::zeros(0, 0),
                    ata: DMatrix::zeros(0, 0),
                    chol: None,
                });
                comps.len() - 1
            });
            loc[j] = Loc::Block(ci, comps[ci].vars.len());
            comps[ci].vars.push(j);
        }
        for c in &mut comps {
            let k = c.vars.len();
            c.base = DMatrix::identity(k, k) * sigma;
            c.ata = DMatrix::zeros(k, k);
        }
        let mut scalar_base = vec![sigma; n];
        let mut scalar_ata = vec![0.0; n];

        for blk in p_blocks {
            for (li, &i) in blk.vars.iter().enumerate() {
                for (lj, &j) in blk.vars.iter().enumerate() {
                    let v = blk.matrix[(li, lj)];
                    if v == 0.0 {
                        continue;
                    }
                    match (loc[i], loc[j]) {
                        (Loc::Block(c, bi), Loc::Block(_, bj)) => comps[c].base[(bi, bj)] += v,
                        (Loc::Scalar, Loc::Scalar) => scalar_base[i] += v,
                        _ => unreachable!("P couples a scalar and a block variable"),
                    }
                }
            }
        }
        let (offsets, cols, vals) = a.csr_data();
        for r in 0..a.nrows() {
            let w = row_weight[r];
            let rc = &cols[offsets[r]..offsets[r + 1]];
            let rv = &vals[offsets[r]..offsets[r + 1]];
            match rc.len() {
                0 => {}
                1 => match loc[rc[0]] {
                    Loc::Scalar => scalar_ata[rc[0]] += w * rv[0] * rv[0],
                    Loc::Block(c, bi) => comps[c].ata[(bi, bi)] += w * rv[0] * rv[0],
                },
                _ => {
                    let Loc::Block(c, _) = loc[rc[0]] else { unreachable!() };
                    let ata = &mut comps[c].ata;
                    for (&i, &vi) in rc.iter().zip(rv) {
                        let Loc::Block(_, bi) = loc[i] else { unreachable!() };
                        for (&j, &vj) in rc.iter().zip(rv) {
                            let Loc::Block(_, bj) = loc[j] else { unreachable!() };
                            ata[(bi, bj)] += w * vi * vj;
                        }
                    }
                }
            }
        }
        Self {
            loc,
            scalar_inv: vec![0.0; n],
            scalar_base,
            scalar_ata,
            comps,
        }
    }

    pub fn factor(&mut self, rho: f64) -> Result<(), ConicError> {
        for (inv, (b, a)) in self
            .scalar_inv
            .iter_mut()
            .zip(self.scalar_base.iter().zip(&self.scalar_ata))
        {
            let d = b + rho * a;
            if d <= 0.0 || !d.is_finite() {
                return Err(ConicError::Factorization { block_size: 1 });
            }
            *inv = 1.0 / d;
        }
        for c in &mut self.comps {
            let k = &c.base + &c.ata * rho;
            let size = k.nrows();
            c.chol = Some(Cholesky::new(k).ok_or(ConicError::Factorization { block_size: size })?);
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        for (j, l) in self.loc.iter().enumerate() {
            if let Loc::Scalar = l {
                rhs[j] *= self.scalar_inv[j];
            }
        }
        for c in &self.comps {
            let mut v = DVector::from_iterator(c.vars.len(), c.vars.iter().map(|&j| rhs[j]));
            c.chol.as_ref().expect("factor() before solve()").solve_mut(&mut v);
            for (&j, x) in c.vars.iter().zip(v.iter()) {
                rhs[j] = *x;
            }
        }
    }

    /// Sizes of the dense components, largest first.
    #[cfg(test)]
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.comps.iter().map(|c| c.vars.len()).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }
}
