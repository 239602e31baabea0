//! Graphs, Laplacians and the node-adaptive shift operator `S(ω) = diag(ω)·L·diag(ω)`.

use crate::error::{check_len, GsrError, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

/// Undirected weighted graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    /// Edges may be given in either orientation; they are stored with `i < j`
    /// and sorted.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(GsrError::InvalidInput("graph needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(GsrError::InvalidInput(format!("edge ({i}, {j}) out of range for {n_nodes} nodes")));
            }
            if i == j {
                return Err(GsrError::InvalidInput(format!("self-loop at node {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(GsrError::InvalidInput(format!("edge ({i}, {j}) has weight {w}")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((a, b)) {
                return Err(GsrError::InvalidInput(format!("duplicate edge ({a}, {b})")));
            }
            out.push((a, b, w));
        }
        out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        Ok(Self { n_nodes, edges: out })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(i, j, w) in &self.edges {
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        a
    }

    /// Neighbour lists `N_i` with edge weights.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut nb = vec![Vec::new(); self.n_nodes];
        for &(i, j, w) in &self.edges {
            nb[i].push((j, w));
            nb[j].push((i, w));
        }
        nb
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_nodes];
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        let nb = self.neighbors();
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &nb[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n_nodes
    }

    /// Subgraph on `nodes`, relabelled `0..nodes.len()` in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut map = vec![usize::MAX; self.n_nodes];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.n_nodes {
                return Err(GsrError::InvalidInput(format!("node {v} out of range")));
            }
            if map[v] != usize::MAX {
                return Err(GsrError::InvalidInput(format!("node {v} listed twice")));
            }
            map[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(i, j, _)| map[i] != usize::MAX && map[j] != usize::MAX)
            .map(|&(i, j, w)| (map[i], map[j], w));
        Graph::new(nodes.len(), edges)
    }

    /// `n_nodes=<n>` header followed by `i j w` lines.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n_nodes={}\n", self.n_nodes);
        for &(i, j, w) in &self.edges {
            let _ = writeln!(s, "{i} {j} {w}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(GsrError::Parse { line: 1, message: "missing header".into() })?;
        let n = header
            .strip_prefix("n_nodes=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or(GsrError::Parse { line: hl, message: format!("expected `n_nodes=<n>`, got `{header}`") })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let bad = |m: &str| GsrError::Parse { line, message: m.to_string() };
            if parts.len() != 3 {
                return Err(bad("expected `i j w`"));
            }
            let i = parts[0].parse::<usize>().map_err(|_| bad("bad node index"))?;
            let j = parts[1].parse::<usize>().map_err(|_| bad("bad node index"))?;
            let w = parts[2].parse::<f64>().map_err(|_| bad("bad weight"))?;
            edges.push((i, j, w));
        }
        Graph::new(n, edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Each unordered pair joined with probability `p` (unit weight). Disconnected
/// draws are discarded, up to 100 attempts.
pub fn erdos_renyi(n: usize, p: f64, rng_seed: u64) -> Result<Graph> {
    const ATTEMPTS: usize = 100;
    if n < 2 {
        return Err(GsrError::InvalidInput("Erdős–Rényi graph needs n ≥ 2".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GsrError::InvalidInput(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..ATTEMPTS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        let g = Graph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GsrError::GenerationFailed { attempts: ATTEMPTS })
}

/// Symmetrised k-nearest-neighbour graph with weights `exp(−scale·d²)`.
///
/// An edge is kept when either endpoint selects the other. Equidistant
/// candidates are ranked by node index.
pub fn knn_geometric(coords: &[Vec<f64>], k: usize, kernel_scale: f64) -> Result<Graph> {
    let n = coords.len();
    if n < 2 {
        return Err(GsrError::InvalidInput("kNN graph needs at least two points".into()));
    }
    if k == 0 || k >= n {
        return Err(GsrError::InvalidInput(format!("k = {k} must lie in [1, {})", n)));
    }
    if !(kernel_scale > 0.0 && kernel_scale.is_finite()) {
        return Err(GsrError::InvalidInput(format!("kernel scale {kernel_scale} must be positive")));
    }
    let dim = coords[0].len();
    for c in coords {
        check_len("coordinate dimension", dim, c.len())?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(GsrError::InvalidInput("non-finite coordinate".into()));
        }
    }
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = d2(&coords[i], &coords[j]);
            if d == 0.0 {
                return Err(GsrError::DuplicateCoordinates(i, j));
            }
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    let mut selected = BTreeSet::new();
    for i in 0..n {
        let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        cand.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for &j in &cand[..k] {
            selected.insert((i.min(j), i.max(j)));
        }
    }
    Graph::new(n, selected.into_iter().map(|(i, j)| (i, j, (-kernel_scale * dist[(i, j)]).exp())))
}

/// Parses `id x y [z…]` lines into (ids, coordinates).
pub fn parse_coordinates(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (k, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut parts = l.split_whitespace();
        let id = parts.next().unwrap_or_default().to_string();
        let c: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let c = c.map_err(|e| GsrError::Parse { line: k + 1, message: e.to_string() })?;
        if c.is_empty() {
            return Err(GsrError::Parse { line: k + 1, message: "missing coordinates".into() });
        }
        ids.push(id);
        coords.push(c);
    }
    Ok((ids, coords))
}

/// Regularisation weights: a scalar `ω0` (penalty `ω0·xᵀLx`) or one weight per node.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeWeights {
    Invariant(f64),
    Adaptive(DVector<f64>),
}

impl NodeWeights {
    pub fn adaptive(w: &[f64]) -> Self {
        Self::Adaptive(DVector::from_column_slice(w))
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        match self {
            Self::Invariant(w0) if !(*w0 >= 0.0 && w0.is_finite()) => {
                Err(GsrError::InvalidInput(format!("ω0 = {w0} must be a finite non-negative number")))
            }
            Self::Invariant(_) => Ok(()),
            Self::Adaptive(w) => check_len("weight vector", n, w.len()),
        }
    }

    /// Per-node vector form; `Invariant(ω0)` maps to `√ω0·1`.
    pub fn to_vector(&self, n: usize) -> DVector<f64> {
        match self {
            Self::Invariant(w0) => DVector::from_element(n, w0.sqrt()),
            Self::Adaptive(w) => w.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    pub(crate) values: DVector<f64>,
    pub(crate) vectors: DMatrix<f64>,
}

/// Combinatorial Laplacian `diag(A·1) − A` with cached spectral data.
#[derive(Debug, Clone)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
    spectrum: Option<Spectrum>,
    lambda_max: f64,
}

/// Above this size only `λ_max` is computed (by power iteration).
pub const DENSE_EIGEN_LIMIT: usize = 2000;

pub fn laplacian(g: &Graph) -> Laplacian {
    let n = g.n_nodes();
    let mut m = -g.adjacency();
    for (i, d) in g.degrees().into_iter().enumerate() {
        m[(i, i)] = d;
    }
    let neighbors = g.neighbors();
    if n <= DENSE_EIGEN_LIMIT {
        let spectrum = sorted_eigen(&m);
        let lambda_max = spectrum.values[n - 1].max(0.0);
        Laplacian { matrix: m, neighbors, spectrum: Some(spectrum), lambda_max }
    } else {
        let lambda_max = power_iteration(&m, 1e-10, 100_000);
        Laplacian { matrix: m, neighbors, spectrum: None, lambda_max }
    }
}

/// Eigendecomposition sorted by ascending eigenvalue, each eigenvector signed
/// so that its first non-negligible entry is positive.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> Spectrum {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        vectors.set_column(c, &v);
    }
    Spectrum { values, vectors }
}

pub(crate) fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = m.nrows();
    // alternating start is never orthogonal to the top eigenvector of a Laplacian
    let mut v = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 } + 1e-3 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn neighbors(&self) -> &[Vec<(usize, f64)>] {
        &self.neighbors
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn spectrum(&self) -> Result<&Spectrum> {
        self.spectrum.as_ref().ok_or_else(|| {
            GsrError::InvalidInput(format!("full spectrum unavailable above {DENSE_EIGEN_LIMIT} nodes"))
        })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<&DVector<f64>> {
        Ok(&self.spectrum()?.values)
    }

    /// Eigenvectors as columns, matching [`Self::eigenvalues`] (the GFT basis `U`).
    pub fn eigenvectors(&self) -> Result<&DMatrix<f64>> {
        Ok(&self.spectrum()?.vectors)
    }

    /// Second-smallest eigenvalue; zero (up to round-off) means disconnected.
    pub fn lambda2(&self) -> Result<f64> {
        let values = &self.spectrum()?.values;
        if values.len() < 2 {
            return Err(GsrError::Disconnected);
        }
        let l2 = values[1];
        if l2 <= 1e-10 * self.lambda_max.max(1.0) {
            return Err(GsrError::Disconnected);
        }
        Ok(l2)
    }

    /// `out = S(ω)·x`, evaluated edge-locally as `ω_i Σ_j A_ij (ω_i x_i − ω_j x_j)`.
    pub fn apply_shift(&self, w: &NodeWeights, x: &[f64], out: &mut [f64]) {
        match w {
            NodeWeights::Invariant(w0) => {
                for (i, nb) in self.neighbors.iter().enumerate() {
                    out[i] = w0 * nb.iter().map(|&(j, a)| a * (x[i] - x[j])).sum::<f64>();
                }
            }
            NodeWeights::Adaptive(w) => {
                for (i, nb) in self.neighbors.iter().enumerate() {
                    let wi = w[i];
                    out[i] = wi * nb.iter().map(|&(j, a)| a * (wi * x[i] - w[j] * x[j])).sum::<f64>();
                }
            }
        }
    }
}

/// Dense `S(ω) = ωωᵀ ⊙ L`; `ω0·L` for the invariant case.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    pub matrix: DMatrix<f64>,
}

pub fn shift_operator(lap: &Laplacian, w: &NodeWeights) -> Result<ShiftOperator> {
    w.check(lap.n())?;
    let matrix = match w {
        NodeWeights::Invariant(w0) => lap.matrix() * *w0,
        NodeWeights::Adaptive(w) => {
            let mut s = lap.matrix().clone();
            for j in 0..s.ncols() {
                for i in 0..s.nrows() {
                    s[(i, j)] *= w[i] * w[j];
                }
            }
            s
        }
    };
    Ok(ShiftOperator { matrix })
}

/// `xᵀS(ω)x` as the edge sum `Σ_(i,j)∈E A_ij (ω_i x_i − ω_j x_j)²`.
pub fn quadratic_form(lap: &Laplacian, x: &[f64], w: &NodeWeights) -> Result<f64> {
    check_len("signal", lap.n(), x.len())?;
    w.check(lap.n())?;
    let mut q = 0.0;
    for (i, nb) in lap.neighbors().iter().enumerate() {
        for &(j, a) in nb.iter().filter(|&&(j, _)| j > i) {
            let d = match w {
                NodeWeights::Invariant(_) => x[i] - x[j],
                NodeWeights::Adaptive(w) => w[i] * x[i] - w[j] * x[j],
            };
            q += a * d * d;
        }
    }
    Ok(match w {
        NodeWeights::Invariant(w0) => w0 * q,
        NodeWeights::Adaptive(_) => q,
    })
}
