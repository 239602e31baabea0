use gsr_core::graph::{erdos_renyi, knn_geometric, laplacian, quadratic_form, shift_operator, Graph, NodeWeights};
use gsr_core::GsrError;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p2() -> Graph {
    Graph::new(2, [(0, 1, 1.0)]).unwrap()
}

fn triangle() -> Graph {
    Graph::new(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap()
}

#[test]
fn complete_pair() {
    for seed in [0, 1, 99] {
        let g = erdos_renyi(2, 1.0, seed).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0)]);
    }
}

#[test]
fn empty_graph_never_connects() {
    assert!(matches!(erdos_renyi(5, 0.0, 3), Err(GsrError::GenerationFailed { .. })));
}

#[test]
fn erdos_renyi_edge_count_concentrates() {
    let g = erdos_renyi(50, 0.5, 7).unwrap();
    assert!(g.is_connected());
    let m = g.edges().len();
    assert!((400..=800).contains(&m), "{m} edges");
    // independent tally from the adjacency matrix
    let a = g.adjacency();
    let upper = (0..50).flat_map(|i| (i + 1..50).map(move |j| (i, j))).filter(|&(i, j)| a[(i, j)] == 1.0).count();
    assert_eq!(upper, m);
}

#[test]
fn erdos_renyi_is_deterministic() {
    assert_eq!(erdos_renyi(20, 0.3, 11).unwrap(), erdos_renyi(20, 0.3, 11).unwrap());
}

#[test]
fn collinear_points_form_a_path() {
    let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
    let g = knn_geometric(&pts, 1, 5.0).unwrap();
    // node 1 is equidistant from 0 and 2 and picks 0; node 2 still picks 1
    let e: Vec<(usize, usize)> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
    assert_eq!(e, vec![(0, 1), (1, 2)]);
}

#[test]
fn unit_distance_kernel_weight() {
    let g = knn_geometric(&[vec![0.0, 0.0], vec![0.6, 0.8]], 1, 5.0).unwrap();
    assert_eq!(g.edges().len(), 1);
    assert!((g.edges()[0].2 - (-5.0f64).exp()).abs() < 1e-15);
}

#[test]
fn knn_degrees_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let g = knn_geometric(&pts, 3, 5.0).unwrap();
    let a = g.adjacency();
    for i in 0..10 {
        let mut order: Vec<usize> = (0..10).filter(|&j| j != i).collect();
        let d = |j: usize| (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
        order.sort_by(|&x, &y| d(x).partial_cmp(&d(y)).unwrap());
        for &j in &order[..3] {
            assert!((a[(i, j)] - (-5.0 * d(j)).exp()).abs() < 1e-14);
        }
        assert!(g.degrees()[i] > 0.0);
        assert!((0..10).filter(|&j| a[(i, j)] > 0.0).count() >= 3);
    }
}

#[test]
fn duplicate_coordinates_rejected() {
    let pts = vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![0.0, 1.0]];
    assert!(matches!(knn_geometric(&pts, 1, 5.0), Err(GsrError::DuplicateCoordinates(0, 2))));
}

#[test]
fn laplacian_of_p2() {
    let lap = laplacian(&p2());
    assert_eq!(lap.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
}

#[test]
fn triangle_spectrum() {
    let lap = laplacian(&triangle());
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(lap.matrix()[(i, j)], if i == j { 2.0 } else { -1.0 });
        }
    }
    // eigenvalues 0, 3, 3
    assert!((lap.lambda_max() - 3.0).abs() < 1e-12);
    assert!((lap.lambda2().unwrap() - 3.0).abs() < 1e-12);
    assert!(lap.eigenvalues().unwrap()[0].abs() < 1e-12);
}

#[test]
fn laplacian_nullspace() {
    let lap = laplacian(&erdos_renyi(25, 0.3, 2).unwrap());
    let l = lap.matrix();
    for i in 0..25 {
        assert!(l.row(i).sum().abs() <= 1e-10 * lap.lambda_max());
    }
    let u0 = lap.eigenvectors().unwrap().column(0).into_owned();
    assert!(lap.eigenvalues().unwrap()[0].abs() < 1e-10);
    for v in u0.iter() {
        assert!((v.abs() - 1.0 / 5.0).abs() < 1e-10);
    }
}

#[test]
fn shift_operator_examples() {
    let lap = laplacian(&p2());
    let (a, b) = (1.5, -0.25);
    let s = shift_operator(&lap, &NodeWeights::adaptive(&[a, b])).unwrap().matrix;
    assert_eq!(s, DMatrix::from_row_slice(2, 2, &[a * a, -a * b, -a * b, b * b]));

    let lap = laplacian(&erdos_renyi(8, 0.5, 1).unwrap());
    let zero = shift_operator(&lap, &NodeWeights::adaptive(&[0.0; 8])).unwrap().matrix;
    assert_eq!(zero, DMatrix::zeros(8, 8));
    let one = shift_operator(&lap, &NodeWeights::adaptive(&[1.0; 8])).unwrap().matrix;
    assert_eq!(&one, lap.matrix());
    assert!(matches!(
        shift_operator(&lap, &NodeWeights::adaptive(&[1.0; 3])),
        Err(GsrError::DimensionMismatch { .. })
    ));
}

#[test]
fn quadratic_form_examples() {
    let lap = laplacian(&p2());
    let ones = NodeWeights::adaptive(&[1.0, 1.0]);
    assert_eq!(quadratic_form(&lap, &[3.0, 3.0], &ones).unwrap(), 0.0);
    assert_eq!(quadratic_form(&lap, &[1.0, 0.0], &ones).unwrap(), 1.0);
    // (2·1 − 1·1)² = 1
    assert_eq!(quadratic_form(&lap, &[1.0, 1.0], &NodeWeights::adaptive(&[2.0, 1.0])).unwrap(), 1.0);
    assert!(quadratic_form(&lap, &[1.0], &ones).is_err());
}

fn random_instance() -> impl Strategy<Value = (Graph, Vec<f64>, Vec<f64>)> {
    (3usize..20, 0.2f64..0.9, any::<u64>()).prop_flat_map(|(n, p, seed)| {
        let g = erdos_renyi(n, p, seed);
        (
            Just(g.unwrap_or_else(|_| Graph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap())),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shift_operator_is_psd((g, w, _) in random_instance()) {
        let lap = laplacian(&g);
        let s = shift_operator(&lap, &NodeWeights::adaptive(&w)).unwrap().matrix;
        let ev = SymmetricEigen::new(s.clone()).eigenvalues;
        prop_assert!(ev.min() >= -1e-10 * ev.amax().max(f64::MIN_POSITIVE));
        // support(S) ⊆ support(L)
        for (sv, lv) in s.iter().zip(lap.matrix().iter()) {
            prop_assert!(*lv != 0.0 || *sv == 0.0);
        }
    }

    #[test]
    fn hadamard_eigenvalue_bound((g, w, _) in random_instance()) {
        let lap = laplacian(&g);
        let s = shift_operator(&lap, &NodeWeights::adaptive(&w)).unwrap().matrix;
        let top = SymmetricEigen::new(s).eigenvalues.max();
        let bound = lap.lambda_max() * w.iter().fold(0.0f64, |m, v| m.max(v * v));
        prop_assert!(top <= bound * (1.0 + 1e-8), "{top} > {bound}");
    }

    #[test]
    fn edge_sum_matches_matrix_form((g, w, x) in random_instance()) {
        let lap = laplacian(&g);
        let wt = NodeWeights::adaptive(&w);
        let s = shift_operator(&lap, &wt).unwrap().matrix;
        let xv = nalgebra::DVector::from_column_slice(&x);
        let dense = (xv.transpose() * &s * &xv)[(0, 0)];
        let edge = quadratic_form(&lap, &x, &wt).unwrap();
        prop_assert!((edge - dense).abs() <= 1e-10 * dense.abs().max(1e-12), "{edge} vs {dense}");
    }

    #[test]
    fn uniform_weights_reduce_to_scalar((g, _, _) in random_instance(), w0 in 0.0f64..4.0) {
        let lap = laplacian(&g);
        let n = g.n_nodes();
        let a = shift_operator(&lap, &NodeWeights::adaptive(&vec![w0.sqrt(); n])).unwrap().matrix;
        let b = shift_operator(&lap, &NodeWeights::Invariant(w0)).unwrap().matrix;
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-14 * y.abs().max(1.0));
        }
    }
}
