//! Type-II Anderson acceleration of a fixed-point iteration `z ← F(z)`.

use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

pub(crate) struct Anderson {
    memory: usize,
    dg: VecDeque<Vec<f64>>,
    df: VecDeque<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    pub fn new(memory: usize) -> Self {
        Self { memory, dg: VecDeque::new(), df: VecDeque::new(), prev: None }
    }

    pub fn reset(&mut self) {
        self.dg.clear();
        self.df.clear();
        self.prev = None;
    }

    /// Given `f = F(z)` and `g = f − z`, returns the next iterate
    /// `f − ΔF·γ` with `γ = argmin ‖g − ΔG·γ‖`.
    pub fn extrapolate(&mut self, f: &[f64], g: &[f64]) -> Vec<f64> {
        if let Some((pf, pg)) = self.prev.take() {
            self.dg.push_back(g.iter().zip(&pg).map(|(a, b)| a - b).collect());
            self.df.push_back(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if self.dg.len() > self.memory {
                self.dg.pop_front();
                self.df.pop_front();
            }
        }
        self.prev = Some((f.to_vec(), g.to_vec()));
        let k = self.dg.len();
        if k == 0 {
            return f.to_vec();
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut m = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for i in 0..k {
            rhs[i] = dot(&self.dg[i], g);
            for j in 0..=i {
                let v = dot(&self.dg[i], &self.dg[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let reg = 1e-8 * m.trace().max(f64::MIN_POSITIVE);
        for i in 0..k {
            m[(i, i)] += reg;
        }
        let Some(gamma) = m.cholesky().map(|c| c.solve(&rhs)) else {
            self.reset();
            return f.to_vec();
        };
        if gamma.iter().any(|v| !v.is_finite()) {
            self.reset();
            return f.to_vec();
        }
        let mut out = f.to_vec();
        for (j, gj) in gamma.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(&self.df[j]) {
                *o -= gj * d;
            }
        }
        out
    }
}
