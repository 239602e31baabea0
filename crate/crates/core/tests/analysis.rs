use gsr_core::analysis::{
    check_corollary1, check_lemma1, check_theorem1, decompose_error, optimal_w0, theorem_quantities, TheoremQuantities,
};
use gsr_core::estimators::solve_direct;
use gsr_core::graph::{erdos_renyi, laplacian, Graph, Laplacian, NodeWeights};
use gsr_core::signal::{add_noise, Covariance, GraphSignal, NoiseModel};
use gsr_core::GsrError;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn er(n: usize, seed: u64) -> Laplacian {
    laplacian(&erdos_renyi(n, 0.4, seed).unwrap())
}

#[test]
fn no_regularisation_is_unbiased() {
    let lap = er(10, 1);
    let x = GraphSignal::new(DVector::from_fn(10, |i, _| i as f64 - 3.0)).unwrap();
    let d = decompose_error(&lap, &NodeWeights::Invariant(0.0), &x, &NoiseModel::white(0.5, 0)).unwrap();
    assert!(d.bias_sq < 1e-24);
    assert!((d.variance - 10.0 * 0.25).abs() < 1e-12);
    assert!((d.mse - d.bias_sq - d.variance).abs() <= 1e-10 * d.mse);
}

#[test]
fn heavy_regularisation_projects_on_the_mean() {
    let n = 12;
    let lap = er(n, 2);
    let x = GraphSignal::new(DVector::from_fn(n, |i, _| (i as f64).sin() + 0.3)).unwrap();
    let sigma = 0.4;
    let d = decompose_error(&lap, &NodeWeights::Invariant(1e8), &x, &NoiseModel::white(sigma, 0)).unwrap();
    // H → (1/N)·11ᵀ via the eigenbasis: only the zero-frequency component survives
    let u = lap.eigenvectors().unwrap();
    let lam = lap.eigenvalues().unwrap();
    let h = u * DMatrix::from_diagonal(&lam.map(|l| 1.0 / (1.0 + 1e8 * l))) * u.transpose();
    let bias = (&h - DMatrix::identity(n, n)) * &x.values;
    let mean = x.values.mean();
    let residual = x.values.map(|v| v - mean);
    assert!((bias.norm_squared() - residual.norm_squared()).abs() < 1e-6 * residual.norm_squared());
    assert!((d.bias_sq - residual.norm_squared()).abs() < 1e-6 * residual.norm_squared());
    assert!((d.variance - sigma * sigma).abs() < 1e-6);
}

#[test]
fn analytic_mse_matches_monte_carlo() {
    let n = 20;
    let lap = er(n, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = GraphSignal::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).unwrap();
    let w = NodeWeights::adaptive(&(0..n).map(|_| rng.random_range(0.3..1.0)).collect::<Vec<_>>());
    let d = decompose_error(&lap, &w, &x, &NoiseModel::white(0.6, 0)).unwrap();
    let draws = 10_000;
    let mut total = 0.0;
    for s in 0..draws {
        let obs = add_noise(&x, &NoiseModel::white(0.6, 1000 + s)).unwrap();
        total += (solve_direct(&lap, &w, &obs).unwrap().estimate.values - &x.values).norm_squared();
    }
    let empirical = total / draws as f64;
    assert!((empirical - d.mse).abs() <= 0.03 * d.mse, "{empirical} vs {}", d.mse);
}

#[test]
fn theorem_quantities_examples() {
    let lap = er(6, 4);
    let x = GraphSignal::from_slice(&[1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
    let e = x.values.norm_squared();
    let tq = theorem_quantities(&lap, &x, &NoiseModel::white(1.0, 0)).unwrap();
    assert!((tq.rho - e).abs() < 1e-12 * e);
    assert!((tq.gamma - tq.rho / (1.0 + tq.rho)).abs() < 1e-12);

    let s = 0.3;
    let tq = theorem_quantities(&lap, &x, &NoiseModel::white(s, 0)).unwrap();
    // the only non-zero eigenvalue of x xᵀ Σ⁻¹
    let p = &x.values * x.values.transpose() / (s * s);
    let top = SymmetricEigen::new(p).eigenvalues.max();
    assert!((tq.rho - top).abs() < 1e-10 * top);

    let x2 = GraphSignal::new(&x.values * 2.0).unwrap();
    let tq2 = theorem_quantities(&lap, &x2, &NoiseModel::white(s, 0)).unwrap();
    assert!((tq2.rho - 4.0 * tq.rho).abs() < 1e-10 * tq2.rho);
    assert!(tq2.gamma > tq.gamma);

    let full = NoiseModel { covariance: Covariance::Full(DMatrix::from_diagonal(&DVector::from_element(6, s * s))), rng_seed: 0 };
    let tqf = theorem_quantities(&lap, &x, &full).unwrap();
    assert!((tqf.rho - tq.rho).abs() < 1e-10 * tq.rho);
}

#[test]
fn lemma1_examples() {
    assert!(check_lemma1(1.0, &[1.0; 5]));
    assert!(!check_lemma1(1.0, &[1.0, 0.5, 2.0]));
    assert!(check_lemma1(0.25, &[-0.5; 4]));
}

fn tq(rho: f64, lambda_max_l: f64) -> TheoremQuantities {
    TheoremQuantities { rho, gamma: rho / (1.0 + rho), lambda_max_l }
}

#[test]
fn theorem1_examples() {
    let w = [1.0, 1.2, 1.5];
    assert!(check_theorem1(1.0, &w, &tq(1e-9, 4.0)));
    let near_one = TheoremQuantities { rho: 1e9, gamma: 1.0 - 1e-9, lambda_max_l: 4.0 };
    assert!(!check_theorem1(0.01, &w, &near_one));
    // uniform weights: both sides reduce to 2γ ≤ 2/(1 + ω0·λ_max)
    let w0: f64 = 0.25;
    let uniform = [w0.sqrt(); 4];
    for rho in [0.1, 0.5, 0.6, 1.0, 3.0] {
        let t = tq(rho, 2.0);
        let reduced = 2.0 * t.gamma <= 2.0 / (1.0 + w0 * 2.0);
        assert_eq!(check_theorem1(w0, &uniform, &t), reduced, "ρ = {rho}");
    }
}

#[test]
fn corollary1_examples() {
    assert!(check_corollary1(&[100.0, -3.0], &tq(0.0, 5.0)));
    assert!(check_corollary1(&[0.0; 3], &tq(1e6, 5.0)));
    assert!(check_corollary1(&[0.5], &tq(1.0, 4.0)));
    assert!(!check_corollary1(&[0.51], &tq(1.0, 4.0)));
}

#[test]
fn optimal_w0_examples() {
    let lap = er(20, 5);
    let l2 = lap.lambda2().unwrap();
    let ln = lap.lambda_max();
    let a = optimal_w0(&lap, 0.0).unwrap();
    assert!((a - 1.0 / (l2 * ln).sqrt()).abs() < 1e-14 * a);
    let b = optimal_w0(&lap, 20.0).unwrap();
    assert!((a / b - 10f64.sqrt()).abs() < 1e-12);
    let disconnected = laplacian(&Graph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap());
    assert!(matches!(optimal_w0(&disconnected, 0.0), Err(GsrError::Disconnected)));
}

/// (graph seed, n, σ, ω0, per-node multipliers ≥ 1, signal).
fn draw() -> impl Strategy<Value = (u64, usize, f64, f64, Vec<f64>, Vec<f64>)> {
    (5usize..=30).prop_flat_map(|n| {
        (
            any::<u64>(),
            Just(n),
            0.05f64..3.0,
            0.001f64..=1.0,
            prop::collection::vec(1.0f64..3.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

fn graph(seed: u64, n: usize) -> Laplacian {
    let g = erdos_renyi(n, 0.3, seed).unwrap_or_else(|_| Graph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap());
    laplacian(&g)
}

fn trace(m: &DMatrix<f64>) -> f64 {
    m.trace()
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adaptive_weights_above_the_floor_reduce_variance((seed, n, sigma, w0, m, x) in draw()) {
        let lap = graph(seed, n);
        let w: Vec<f64> = m.iter().enumerate().map(|(i, k)| if i % 2 == 0 { 1.0 } else { -1.0 } * k * w0.sqrt()).collect();
        prop_assume!(check_lemma1(w0, &w));
        let x = GraphSignal::from_slice(&x).unwrap();
        let noise = NoiseModel::white(sigma, 0);
        let na = decompose_error(&lap, &NodeWeights::adaptive(&w), &x, &noise).unwrap();
        let ni = decompose_error(&lap, &NodeWeights::Invariant(w0), &x, &noise).unwrap();
        prop_assert!(na.variance <= ni.variance + 1e-10, "{} > {}", na.variance, ni.variance);
    }

    #[test]
    fn sufficient_conditions_reduce_mse((seed, n, sigma, frac, m, x) in draw()) {
        let lap = graph(seed, n);
        let x = GraphSignal::from_slice(&x).unwrap();
        prop_assume!(x.values.norm_squared() > 1e-6);
        let noise = NoiseModel::white(sigma, 0);
        let q = theorem_quantities(&lap, &x, &noise).unwrap();
        // ω_i² spread over [ω0, 1/(ρλ_max)]
        let cap = 1.0 / (q.rho * q.lambda_max_l);
        let w0 = (frac * cap).min(1.0);
        let w: Vec<f64> = m.iter().map(|k| (w0 + (cap - w0) * (k - 1.0) / 2.0).sqrt() * (1.0 + 1e-12)).collect();
        prop_assume!(check_lemma1(w0, &w) && check_corollary1(&w, &q));
        prop_assert!(check_theorem1(w0, &w, &q));
        let na = decompose_error(&lap, &NodeWeights::adaptive(&w), &x, &noise).unwrap();
        let ni = decompose_error(&lap, &NodeWeights::Invariant(w0), &x, &noise).unwrap();
        prop_assert!(na.mse <= ni.mse + 1e-10, "{} > {}", na.mse, ni.mse);
        prop_assert!(na.variance <= ni.variance + 1e-10);
    }

    #[test]
    fn decomposition_adds_up((seed, n, sigma, _w0, m, x) in draw()) {
        let lap = graph(seed, n);
        let x = GraphSignal::from_slice(&x).unwrap();
        let d = decompose_error(&lap, &NodeWeights::adaptive(&m), &x, &NoiseModel::white(sigma, 0)).unwrap();
        prop_assert!((d.mse - d.bias_sq - d.variance).abs() <= 1e-10 * d.mse.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn difference_of_squares_trace_identity(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symmetric(&mut rng, n);
        let b = random_symmetric(&mut rng, n);
        let c = random_symmetric(&mut rng, n);
        let lhs = trace(&((&a * &a - &b * &b) * &c));
        let rhs = trace(&((&a - &b) * (&a + &b) * &c));
        prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn psd_times_nsd_has_nonpositive_trace(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &f * f.transpose();
        let b = -(&g * g.transpose());
        prop_assert!(trace(&(&a * &b)) <= 1e-10);
    }
}
