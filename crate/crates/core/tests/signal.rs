use gsr_core::graph::{erdos_renyi, laplacian, quadratic_form, Graph, NodeWeights};
use gsr_core::signal::{
    add_noise, bandlimited_signal, bandlimited_signal_random, load_station_csv, nmse, parse_station_csv, snr_to_sigma,
    write_station_csv, Covariance, GraphSignal, NoiseModel,
};
use gsr_core::GsrError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn full_band_signal_is_eigenbasis_sum() {
    let lap = laplacian(&erdos_renyi(12, 0.4, 3).unwrap());
    let u = lap.eigenvectors().unwrap();
    let x = bandlimited_signal(&lap, 12, 0).unwrap();
    let expected = u * DVector::from_element(12, 1.0);
    assert!((x.values - expected).norm() < 1e-12);
}

#[test]
fn single_frequency_is_constant() {
    let lap = laplacian(&erdos_renyi(10, 0.5, 1).unwrap());
    let x = bandlimited_signal(&lap, 1, 0).unwrap();
    let c = x.values[0];
    assert!((c.abs() - 1.0 / 10f64.sqrt()).abs() < 1e-12);
    assert!(x.values.iter().all(|v| (v - c).abs() < 1e-12));
}

#[test]
fn bandlimited_smoothness_is_sum_of_low_eigenvalues() {
    let lap = laplacian(&erdos_renyi(50, 0.5, 7).unwrap());
    let x = bandlimited_signal(&lap, 20, 0).unwrap();
    let q = quadratic_form(&lap, x.values.as_slice(), &NodeWeights::Invariant(1.0)).unwrap();
    let expected: f64 = lap.eigenvalues().unwrap().iter().take(20).sum();
    assert!((q - expected).abs() < 1e-9 * expected, "{q} vs {expected}");
}

#[test]
fn bandwidth_out_of_range() {
    let lap = laplacian(&Graph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
    assert!(bandlimited_signal(&lap, 0, 0).is_err());
    assert!(bandlimited_signal(&lap, 4, 0).is_err());
}

#[test]
fn zero_noise_is_exact() {
    let x = GraphSignal::from_slice(&[1.0, -2.0, 3.5]).unwrap();
    let obs = add_noise(&x, &NoiseModel::white(0.0, 9)).unwrap();
    assert_eq!(obs.y, x.values);
    assert!(obs.is_full());
}

#[test]
fn noise_sample_covariance() {
    let n = 4;
    let sigma = 0.7;
    let x = GraphSignal::new(DVector::zeros(n)).unwrap();
    let draws = 10_000;
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for s in 0..draws {
        let y = add_noise(&x, &NoiseModel::white(sigma, s)).unwrap().y;
        cov += &y * y.transpose();
    }
    cov /= draws as f64;
    let target = DMatrix::<f64>::identity(n, n) * sigma * sigma;
    assert!((&cov - &target).norm() <= 0.05 * target.norm(), "{cov}");
}

#[test]
fn noise_is_deterministic() {
    let x = GraphSignal::from_slice(&[1.0; 6]).unwrap();
    let m = NoiseModel::white(1.0, 1234);
    assert_eq!(add_noise(&x, &m).unwrap(), add_noise(&x, &m).unwrap());
    let other = NoiseModel::white(1.0, 1235);
    assert_ne!(add_noise(&x, &m).unwrap(), add_noise(&x, &other).unwrap());
}

#[test]
fn full_covariance_noise() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 1.0]);
    let model = NoiseModel { covariance: Covariance::Full(m.clone()), rng_seed: 0 };
    let x = GraphSignal::from_slice(&[0.0, 0.0]).unwrap();
    let draws = 20_000;
    let mut cov = DMatrix::<f64>::zeros(2, 2);
    for s in 0..draws {
        let y = add_noise(&x, &NoiseModel { rng_seed: s, ..model.clone() }).unwrap().y;
        cov += &y * y.transpose();
    }
    cov /= draws as f64;
    assert!((&cov - &m).norm() <= 0.05 * m.norm(), "{cov}");
}

#[test]
fn snr_examples() {
    let n = 8;
    let unit = GraphSignal::new(DVector::from_element(n, 1.0)).unwrap();
    assert!((snr_to_sigma(&unit, 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((snr_to_sigma(&unit, 20.0).unwrap() - 0.1).abs() < 1e-15);
    let four = GraphSignal::new(DVector::from_element(n, 2.0)).unwrap();
    assert!((snr_to_sigma(&four, 0.0).unwrap() - 2.0).abs() < 1e-15);
    let zero = GraphSignal::new(DVector::zeros(n)).unwrap();
    assert!(matches!(snr_to_sigma(&zero, 0.0), Err(GsrError::ZeroSignal)));
}

#[test]
fn nmse_examples() {
    let t = GraphSignal::from_slice(&[1.0, -2.0, 0.5]).unwrap();
    assert_eq!(nmse(&t, &t).unwrap(), 0.0);
    let zero = GraphSignal::from_slice(&[0.0; 3]).unwrap();
    assert_eq!(nmse(&zero, &t).unwrap(), 1.0);
    let double = GraphSignal::new(&t.values * 2.0).unwrap();
    assert_eq!(nmse(&double, &t).unwrap(), 1.0);
    assert!(matches!(nmse(&t, &zero), Err(GsrError::ZeroSignal)));
}

#[test]
fn constant_station_data_demeans_to_zero() {
    let text = "station_id,lat,lon\na,0,0\nb,1,0\nc,0,2\n\ntimestamp,a,b,c\nt0,7.25,7.25,7.25\nt1,7.25,7.25,7.25\n";
    let data = parse_station_csv(text, 1, 5.0).unwrap();
    assert_eq!(data.mean, 7.25);
    for s in &data.signals {
        assert!(s.values.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn hand_demeaned_table() {
    // columns listed in a different order than the coordinate block
    let text = "station_id,lat,lon\na,0,0\nb,1,0\nc,0,2\n\ntimestamp,c,a,b\nt0,3,1,2\nt1,6,4,2\n";
    let data = parse_station_csv(text, 1, 5.0).unwrap();
    // grand mean of {1,2,3,4,2,6} = 3
    assert_eq!(data.mean, 3.0);
    assert_eq!(data.timestamps, vec!["t0", "t1"]);
    assert_eq!(data.signals[0].values.as_slice(), &[-2.0, -1.0, 0.0]);
    assert_eq!(data.signals[1].values.as_slice(), &[1.0, -1.0, 3.0]);
    assert_eq!(data.signals[0].node_ids.as_deref(), Some(&["a".to_string(), "b".into(), "c".into()][..]));
}

#[test]
fn thirty_two_station_file() {
    let ids: Vec<String> = (0..32).map(|i| format!("s{i:02}")).collect();
    let coords: Vec<(f64, f64)> = (0..32).map(|i| (48.0 + 0.1 * (i % 8) as f64, -4.0 + 0.13 * (i / 8) as f64 + 0.01 * i as f64)).collect();
    let ts: Vec<String> = (0..5).map(|t| format!("2014-01-01T0{t}")).collect();
    let values: Vec<Vec<f64>> = (0..5).map(|t| (0..32).map(|i| 5.0 + t as f64 + 0.1 * i as f64).collect()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stations.csv");
    write_station_csv(&path, &ids, &coords, &ts, &values).unwrap();
    let data = load_station_csv(&path, 5, 5.0).unwrap();
    assert_eq!(data.graph.n_nodes(), 32);
    assert_eq!(data.signals.len(), 5);
    let all: Vec<f64> = data.signals.iter().flat_map(|s| s.values.iter().copied()).collect();
    let range = all.iter().cloned().fold(f64::MIN, f64::max) - all.iter().cloned().fold(f64::MAX, f64::min);
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    assert!(grand.abs() <= 1e-12 * range);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gft_energy_identity(n in 3usize..25, seed in any::<u64>()) {
        let g = erdos_renyi(n, 0.5, seed);
        prop_assume!(g.is_ok());
        let lap = laplacian(&g.unwrap());
        let x = bandlimited_signal_random(&lap, n, seed).unwrap();
        let coeffs = lap.eigenvectors().unwrap().transpose() * &x.values;
        let e = x.values.norm_squared();
        prop_assert!((e - coeffs.norm_squared()).abs() <= 1e-10 * e);
    }

    #[test]
    fn nmse_is_scale_covariant(
        v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10),
        a in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
    ) {
        let t: Vec<f64> = v.iter().map(|p| p.0).collect();
        let e: Vec<f64> = v.iter().map(|p| p.1).collect();
        let t = GraphSignal::from_slice(&t).unwrap();
        prop_assume!(t.values.norm_squared() > 1e-6);
        let e = GraphSignal::from_slice(&e).unwrap();
        let base = nmse(&e, &t).unwrap();
        let scaled = nmse(&GraphSignal::new(&e.values * a).unwrap(), &GraphSignal::new(&t.values * a).unwrap()).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1.0));
    }
}
