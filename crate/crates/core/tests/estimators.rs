use gsr_core::estimators::{
    diffusion_kernel, shift_spectral_norm, solve, solve_cg, solve_direct, solve_distributed, solve_interpolation, solve_krr_diffusion,
    Filter, SolveMethod, SolveOptions,
};
use gsr_core::graph::{erdos_renyi, laplacian, Graph, Laplacian, NodeWeights};
use gsr_core::signal::Observation;
use gsr_core::GsrError;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p2() -> Laplacian {
    laplacian(&Graph::new(2, [(0, 1, 1.0)]).unwrap())
}

fn path(n: usize) -> Laplacian {
    laplacian(&Graph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap())
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Random 30-node instance with weights scaled so that `‖S(ω)‖ = target`.
fn scaled_instance(seed: u64, target: f64) -> (Laplacian, NodeWeights, Observation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lap = laplacian(&erdos_renyi(30, 0.2, seed).unwrap());
    let w: Vec<f64> = (0..30).map(|_| rng.random_range(0.2..1.0)).collect();
    let norm = shift_spectral_norm(&lap, &NodeWeights::adaptive(&w)).unwrap();
    let c = (target / norm).sqrt();
    let w = NodeWeights::adaptive(&w.iter().map(|v| v * c).collect::<Vec<_>>());
    let y = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
    (lap, w, Observation::full(y))
}

#[test]
fn zero_weights_return_observation() {
    let lap = path(4);
    let y = DVector::from_column_slice(&[1.0, -2.0, 0.5, 3.0]);
    let obs = Observation::full(y.clone());
    let w = NodeWeights::adaptive(&[0.0; 4]);
    assert_eq!(solve_direct(&lap, &w, &obs).unwrap().estimate.values, y);
    let cg = solve_cg(&lap, &w, &obs, &SolveOptions::default()).unwrap();
    assert_eq!(cg.iterations_used, 1);
    assert!(rel(&cg.estimate.values, &y) < 1e-15);
    let opts = SolveOptions { max_iterations: Some(1), ..SolveOptions::default() };
    let d = solve_distributed(&lap, &w, &obs, &opts).unwrap();
    assert_eq!(d.estimate.values, y);
    assert_eq!(d.spectral_norm_bound, Some(0.0));
    assert!(!d.divergence_warning);
}

#[test]
fn p2_direct_solve() {
    let obs = Observation::full(DVector::from_column_slice(&[1.0, 0.0]));
    let x = solve_direct(&p2(), &NodeWeights::Invariant(1.0), &obs).unwrap().estimate.values;
    assert!((x[0] - 2.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn cg_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let lap = laplacian(&erdos_renyi(30, 0.2, 5).unwrap());
    let w = NodeWeights::adaptive(&(0..30).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<_>>());
    let obs = Observation::full(DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0)));
    let direct = solve_direct(&lap, &w, &obs).unwrap().estimate.values;
    let opts = SolveOptions { cg_tolerance: 1e-10, ..SolveOptions::with_method(SolveMethod::ConjugateGradient) };
    let cg = solve(&lap, &w, &obs, &opts).unwrap();
    assert!(rel(&cg.estimate.values, &direct) < 1e-8);
    assert!(cg.iterations_used <= 30);
}

#[test]
fn cg_warm_start_at_solution() {
    let lap = path(6);
    let w = NodeWeights::Invariant(0.7);
    let obs = Observation::full(DVector::from_fn(6, |i, _| (i as f64).sin()));
    let exact = solve_direct(&lap, &w, &obs).unwrap().estimate.values;
    let opts = SolveOptions { warm_start: Some(exact.clone()), ..SolveOptions::default() };
    let r = solve_cg(&lap, &w, &obs, &opts).unwrap();
    assert_eq!(r.iterations_used, 0);
    assert_eq!(r.estimate.values, exact);
}

#[test]
fn distributed_geometric_decay() {
    let (lap, w, obs) = scaled_instance(3, 0.5);
    let direct = solve_direct(&lap, &w, &obs).unwrap().estimate.values;
    let err = |t: usize| {
        let opts = SolveOptions { max_iterations: Some(t), ..SolveOptions::default() };
        let r = solve_distributed(&lap, &w, &obs, &opts).unwrap();
        assert!((r.spectral_norm_bound.unwrap() - 0.5).abs() < 1e-12);
        (r.estimate.values - &direct).norm()
    };
    let (e5, e10, e20) = (err(5), err(10), err(20));
    // ‖x_T − x̂‖ = ‖S^T x̂‖ ≤ ‖S‖^T ‖x̂‖
    for (t, e) in [(5, e5), (10, e10), (20, e20)] {
        assert!(e <= 0.5f64.powi(t) * direct.norm() * (1.0 + 1e-9), "T={t}: {e}");
    }
    assert!(e10 / e5 <= 0.5f64.powi(5) * 1.1);
    assert!(e20 / e10 <= 0.5f64.powi(10) * 1.1);
}

#[test]
fn distributed_flags_divergence() {
    let (lap, w, obs) = scaled_instance(4, 1.2);
    let opts = SolveOptions { max_iterations: Some(10), ..SolveOptions::default() };
    let r = solve_distributed(&lap, &w, &obs, &opts).unwrap();
    assert!(r.divergence_warning);
    assert!((r.spectral_norm_bound.unwrap() - 1.2).abs() < 1e-10);
}

#[test]
fn full_mask_interpolation_is_denoising() {
    let lap = laplacian(&erdos_renyi(15, 0.3, 8).unwrap());
    let w = NodeWeights::adaptive(&(0..15).map(|i| 0.5 + 0.05 * i as f64).collect::<Vec<_>>());
    let obs = Observation::full(DVector::from_fn(15, |i, _| (i as f64 * 0.7).cos()));
    let a = solve_interpolation(&lap, &w, &obs, &SolveOptions::default()).unwrap().estimate.values;
    let b = solve_direct(&lap, &w, &obs).unwrap().estimate.values;
    assert!(rel(&a, &b) < 1e-13);
}

#[test]
fn p2_interpolation_copies_value() {
    let obs = Observation::masked(DVector::from_column_slice(&[1.0, 0.0]), &[0]).unwrap();
    let w = NodeWeights::adaptive(&[1.0, 1.0]);
    for method in [SolveMethod::Direct, SolveMethod::ConjugateGradient] {
        let x = solve_interpolation(&p2(), &w, &obs, &SolveOptions::with_method(method)).unwrap().estimate.values;
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12, "{x}");
    }
}

#[test]
fn unconstrained_interpolation_is_singular() {
    let obs = Observation::masked(DVector::from_column_slice(&[1.0, 2.0, 0.0]), &[0, 1]).unwrap();
    let r = solve_interpolation(&path(3), &NodeWeights::adaptive(&[0.0; 3]), &obs, &SolveOptions::default());
    assert!(matches!(r, Err(GsrError::Singular(_))));
}

#[test]
fn krr_without_diffusion_shrinks() {
    let n = 5;
    let mu = 1e-2;
    let y = DVector::from_column_slice(&[1.0, -1.0, 2.0, 0.0, 0.5]);
    let x = solve_krr_diffusion(&path(n), &Observation::full(y.clone()), 0.0, mu).unwrap().estimate.values;
    assert!(rel(&x, &(&y / (1.0 + n as f64 * mu))) < 1e-12);
}

/// `exp(A)` by a truncated Taylor series after scaling by `2^-s`.
fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let s = 10;
    let b = a / 2f64.powi(s);
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn diffusion_kernel_matches_series() {
    let lap = path(5);
    let k = diffusion_kernel(&lap, 1.0).unwrap();
    let oracle = expm_taylor(&(lap.matrix() * -0.5));
    assert!((&k - &oracle).norm() < 1e-8);

    let y = DVector::from_column_slice(&[0.3, 1.0, -0.2, 0.8, 0.1]);
    let obs = Observation::masked(y.clone(), &[0, 2, 4]).unwrap();
    let x = solve_krr_diffusion(&lap, &obs, 1.0, 1e-4).unwrap().estimate.values;
    let m = [0, 2, 4];
    let kmm = DMatrix::from_fn(3, 3, |a, b| oracle[(m[a], m[b])]) + DMatrix::identity(3, 3) * (3.0 * 1e-4);
    let alpha = kmm.lu().solve(&DVector::from_fn(3, |a, _| y[m[a]])).unwrap();
    let expected = DMatrix::from_fn(5, 3, |i, b| oracle[(i, m[b])]) * alpha;
    assert!(rel(&x, &expected) < 1e-8);
}

fn instance() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>)> {
    (any::<u64>(), prop::collection::vec(-2.0f64..2.0, 12), prop::collection::vec(-3.0f64..3.0, 12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_a_contraction((seed, w, y) in instance()) {
        let lap = laplacian(&erdos_renyi(12, 0.4, seed).unwrap_or_else(|_| Graph::new(12, (0..11).map(|i| (i, i + 1, 1.0))).unwrap()));
        let wt = NodeWeights::adaptive(&w);
        let h = Filter::new(&lap, &wt).unwrap().matrix;
        prop_assert!((&h - h.transpose()).amax() < 1e-12);
        let ev = SymmetricEigen::new(h).eigenvalues;
        prop_assert!(ev.min() > 0.0 && ev.max() <= 1.0 + 1e-12);
        let y = DVector::from_column_slice(&y);
        let x = solve_direct(&lap, &wt, &Observation::full(y.clone())).unwrap().estimate.values;
        prop_assert!(x.norm() <= y.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn uniform_weights_reduce_to_scalar((seed, _, y) in instance(), w0 in 0.01f64..0.2) {
        let lap = laplacian(&erdos_renyi(12, 0.4, seed).unwrap_or_else(|_| Graph::new(12, (0..11).map(|i| (i, i + 1, 1.0))).unwrap()));
        let obs = Observation::full(DVector::from_column_slice(&y));
        let a = NodeWeights::adaptive(&[w0.sqrt(); 12]);
        let b = NodeWeights::Invariant(w0);
        for method in [SolveMethod::Direct, SolveMethod::ConjugateGradient, SolveMethod::Distributed] {
            let opts = SolveOptions { max_iterations: Some(200), ..SolveOptions::with_method(method) };
            let xa = solve(&lap, &a, &obs, &opts).unwrap().estimate.values;
            let xb = solve(&lap, &b, &obs, &opts).unwrap().estimate.values;
            prop_assert!(rel(&xa, &xb) <= 1e-12, "{method:?}: {}", rel(&xa, &xb));
        }
    }
}
