use proptest::prelude::*;
use stp_core::linalg::{matmul, svd_oracle, DenseMatrix};
use stp_core::metrics::rmse_step;
use stp_core::preprocess::{center_transient, segment_series, uncenter, SnapshotSeries};
use stp_core::stp::{build_hindcast_matrix, expansion_coefficients, fit, fit_basis};
use stp_core::synth::{gen_linear_map, LinearMapKind, LinearMapSpec, SplitMix64};
use stp_core::types::{DataKind, Ensemble, HorizonSpec, WeightVector};

fn random_ensemble(k: usize, h: HorizonSpec, seed: u64) -> Ensemble {
    let mut rng = SplitMix64::new(seed);
    let data = (0..k * h.episode_len()).map(|_| rng.normal()).collect();
    Ensemble::from_flat(data, h, DataKind::Transient, false, None).unwrap()
}

fn random_weights(p: usize, seed: u64) -> WeightVector {
    let mut rng = SplitMix64::new(seed ^ 0xABCD);
    WeightVector::new((0..p).map(|_| 0.25 + 2.0 * rng.uniform()).collect()).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hindcast_modes_are_weighted_orthonormal(
        k in 2usize..40, n in 1usize..6, m in 1usize..4, p in 1usize..12, seed in any::<u64>()
    ) {
        let h = HorizonSpec::new(n, m, p).unwrap();
        let (train, _) = center_transient(random_ensemble(k, h, seed)).unwrap();
        let w = random_weights(p, seed);
        let model = fit(&train, k, &w).unwrap();
        prop_assert!(model.orthonormality_error() <= 1e-10);
        let top = model.hindcast_modes();
        for l in 0..model.rank() {
            prop_assert_eq!(top.col(l), model.hindcast_mode(l));
        }
        prop_assert!(model.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn gram_route_matches_svd_oracle(k in 2usize..30, np in 1usize..40, seed in any::<u64>()) {
        let h = HorizonSpec::new(1, 1, np).unwrap();
        let train = random_ensemble(k, h, seed).assume_centered();
        let w = random_weights(np, seed);
        let basis = fit_basis(&train, &w).unwrap();
        let q = build_hindcast_matrix(&train).unwrap();
        let mut scaled = q.clone();
        for j in 0..k {
            for i in 0..np {
                scaled.set(i, j, q.get(i, j) * (w.at(i) / k as f64).sqrt());
            }
        }
        let (sv, _) = svd_oracle(&scaled).unwrap();
        let lead = basis.eigenvalues()[0];
        for (i, lam) in basis.eigenvalues().iter().enumerate() {
            let sq = sv.get(i).map_or(0.0, |s| s * s);
            prop_assert!((lam - sq).abs() <= 1e-9 * lead.max(lam.abs()),
                "mode {i}: {lam} vs {sq}");
        }
    }

    #[test]
    fn hindcast_error_decreases_with_rank(k in 3usize..20, seed in any::<u64>()) {
        let h = HorizonSpec::new(4, 2, 3).unwrap();
        let (train, mean) = center_transient(random_ensemble(k, h, seed)).unwrap();
        let model = fit(&train, k, &WeightVector::uniform(3)).unwrap().with_mean(mean);
        let probe = random_ensemble(1, h, seed.wrapping_add(1));
        let q = probe.hindcast(0);
        let mut previous = f64::INFINITY;
        for r in 1..=k {
            let pred = model.truncated(r).unwrap().predict_raw(q).unwrap();
            let err = rmse_step(&pred.hindcast, q).unwrap();
            prop_assert!(err <= previous * (1.0 + 1e-12) + 1e-14);
            previous = err;
        }
    }

    #[test]
    fn prediction_is_linear(alpha in -5.0f64..5.0, seed in any::<u64>()) {
        let h = HorizonSpec::new(3, 3, 2).unwrap();
        let (train, _) = center_transient(random_ensemble(8, h, seed)).unwrap();
        let model = fit(&train, 5, &WeightVector::uniform(2)).unwrap();
        let probe = random_ensemble(1, h, seed ^ 1);
        let q = probe.hindcast(0);
        let scaled: Vec<f64> = q.iter().map(|x| alpha * x).collect();
        let a = model.predict(q).unwrap().trajectory();
        let b = model.predict(&scaled).unwrap().trajectory();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((alpha * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn centering_round_trips(k in 1usize..10, seed in any::<u64>()) {
        let h = HorizonSpec::new(2, 2, 3).unwrap();
        let raw = random_ensemble(k, h, seed);
        let (centered, mean) = center_transient(raw.clone()).unwrap();
        let zero = stp_core::preprocess::ensemble_mean(
            &Ensemble::from_flat(centered.data().to_vec(), h, DataKind::Transient, false, None).unwrap()
        ).unwrap();
        prop_assert!(zero.values().iter().all(|x| x.abs() <= 1e-12));
        let back = uncenter(centered, &mean).unwrap();
        for (a, b) in back.data().iter().zip(raw.data()) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn segmentation_count_formula(len in 1usize..300, n in 1usize..10, m in 1usize..10, stride in 1usize..15) {
        let series = SnapshotSeries::new(1, vec![0.0; len]).unwrap();
        let expected = (0..len).filter(|s| s % stride == 0 && s + n + m <= len).count();
        match segment_series(&series, n, m, stride) {
            Ok((e, starts)) => {
                prop_assert_eq!(e.k(), expected);
                prop_assert_eq!(starts.len(), expected);
            }
            Err(_) => prop_assert_eq!(expected, 0),
        }
    }

    #[test]
    fn split_sets_are_disjoint(len in 40usize..400, stride in 1usize..12, frac in 0.1f64..0.9) {
        let series = SnapshotSeries::new(1, (0..len).map(|x| x as f64).collect()).unwrap();
        let spec = stp_core::preprocess::SegmentationSpec::new(5, 4, stride, frac).unwrap();
        let seg = stp_core::preprocess::segment_stationary(&series, &spec).unwrap();
        let last_train = *seg.train_starts.last().unwrap();
        for s in &seg.test_starts {
            prop_assert!(*s >= last_train + 9);
            prop_assert!(!seg.train_starts.contains(s));
        }
    }

    #[test]
    fn rmse_is_symmetric_and_scales(a in prop::collection::vec(-10.0f64..10.0, 1..20), alpha in -4.0f64..4.0) {
        let b: Vec<f64> = a.iter().map(|x| x * 0.5 - 1.0).collect();
        prop_assert_eq!(rmse_step(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(rmse_step(&a, &b).unwrap(), rmse_step(&b, &a).unwrap());
        let sa: Vec<f64> = a.iter().map(|x| alpha * x).collect();
        let sb: Vec<f64> = b.iter().map(|x| alpha * x).collect();
        let lhs = rmse_step(&sa, &sb).unwrap();
        let rhs = alpha.abs() * rmse_step(&a, &b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }
}

#[test]
fn coefficient_identities_at_full_rank() {
    let h = HorizonSpec::new(5, 2, 6).unwrap();
    for seed in 0..5 {
        let (train, _) = center_transient(random_ensemble(12, h, seed)).unwrap();
        let w = random_weights(6, seed);
        let basis = fit_basis(&train, &w).unwrap();
        let model = basis.extend(&train, 12).unwrap();
        let k = 12usize;
        let r = model.rank();
        // centering removes one dimension
        assert_eq!(r, k - 1);
        let q = build_hindcast_matrix(&train).unwrap();
        let a = expansion_coefficients(&model.hindcast_modes(), &w, &q).unwrap();
        let psi = basis.eig().eigenvectors.leading_cols(r);
        let mut expected = psi.transpose();
        for l in 0..r {
            let s = (k as f64 * model.eigenvalues()[l]).sqrt();
            for j in 0..k {
                expected.set(l, j, expected.get(l, j) * s);
            }
        }
        assert!(a.max_abs_diff(&expected) <= 1e-9 * expected.max_abs());
        let mut ata = matmul(&a, &a.transpose()).unwrap();
        ata.scale(1.0 / k as f64);
        let lam = DenseMatrix::diag(model.eigenvalues());
        assert!(ata.max_abs_diff(&lam) <= 1e-9 * model.eigenvalues()[0]);
    }
}

#[test]
fn deterministic_map_forecast_is_exact() {
    let h = HorizonSpec::new(2, 3, 3).unwrap();
    for seed in 0..5 {
        let spec = LinearMapSpec { k: 20, horizon: h, map: LinearMapKind::Random { gain: 1.0 }, seed };
        let data = gen_linear_map(&spec).unwrap();
        let (train, mean) = center_transient(data.ensemble).unwrap();
        let model = fit(&train, 20, &WeightVector::uniform(3)).unwrap().with_mean(mean);
        let mut rng = SplitMix64::new(seed + 100);
        let q: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let pred = model.predict_raw(&q).unwrap();
        let mut expected = vec![0.0; 9];
        for (j, x) in q.iter().enumerate() {
            for (e, l) in expected.iter_mut().zip(data.map.col(j)) {
                *e += l * x;
            }
        }
        assert!(rel_err(&pred.forecast, &expected) <= 1e-8);
    }
}

#[test]
fn persistence_map_is_reproduced() {
    let h = HorizonSpec::new(3, 4, 2).unwrap();
    let data = gen_linear_map(&LinearMapSpec { k: 30, horizon: h, map: LinearMapKind::Persistence, seed: 4 }).unwrap();
    let (train, mean) = center_transient(data.ensemble).unwrap();
    let model = fit(&train, 30, &WeightVector::uniform(2)).unwrap().with_mean(mean);
    let q = [0.3, -1.0, 2.0, 0.5, -0.7, 1.1];
    let pred = model.predict_raw(&q).unwrap();
    for s in 0..4 {
        assert!((pred.forecast[2 * s] + 0.7).abs() < 1e-8);
        assert!((pred.forecast[2 * s + 1] - 1.1).abs() < 1e-8);
    }
}

#[test]
fn zero_map_forecasts_zero() {
    let h = HorizonSpec::new(2, 2, 2).unwrap();
    let data = gen_linear_map(&LinearMapSpec { k: 10, horizon: h, map: LinearMapKind::Zero, seed: 9 }).unwrap();
    let (train, mean) = center_transient(data.ensemble).unwrap();
    let model = fit(&train, 10, &WeightVector::uniform(2)).unwrap().with_mean(mean);
    let pred = model.predict(&[0.4, -0.2, 1.0, 0.3]).unwrap();
    assert!(pred.forecast.iter().all(|x| x.abs() <= 1e-10));
}
