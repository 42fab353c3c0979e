use ndarray::Array2;
use nnevclus::dissim::PhiTransform;
use nnevclus::eval::adjusted_rand_index;
use nnevclus::network::{Gate, Model, NetworkParams, Standardizer};
use nnevclus::ocsvm::OneClassSvm;
use nnevclus::{bundle, EvidentialPartition, FocalScheme, FocalSets, Frame};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scheme() -> impl Strategy<Value = FocalScheme> {
    prop_oneof![Just(FocalScheme::Full), Just(FocalScheme::SingletonsPlus), Just(FocalScheme::PairsPlus),]
}

fn mass(f: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, f).prop_filter_map("all zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn model(c: usize, scheme: FocalScheme, d: usize, seed: u64, gated: bool) -> Model {
    let focal = FocalSets::build(Frame::new(c).unwrap(), scheme).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParams::random(d, &[4], focal.len(), &mut rng).unwrap();
    params.beta0 = 0.3;
    params.beta1 = 2.0;
    let x = Array2::from_shape_fn((10, d), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    Model {
        focal,
        params,
        phi: PhiTransform::with_delta0(2.0).unwrap(),
        svm: gated.then(|| OneClassSvm::fit_with(x.view(), 0.3, 0.5, seed).unwrap()),
        pca: None,
        scaler: Some(Standardizer::fit(x.view()).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conflict_is_symmetric_and_bounded(
        (fs, a, b) in (2usize..5, scheme()).prop_flat_map(|(c, s)| {
            let fs = FocalSets::build(Frame::new(c).unwrap(), s).unwrap();
            let f = fs.len();
            (Just(fs), mass(f), mass(f))
        })
    ) {
        let ab = fs.degree_of_conflict(&a, &b).unwrap();
        let ba = fs.degree_of_conflict(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-14);
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&ab));
        let (same, different) = fs.plausibility_same(&a, &b).unwrap();
        prop_assert!(same <= 1.0 + 1e-12 && different <= 1.0 + 1e-12);
        // every product of nonempty sets supports at least one of the two events
        let empty = fs.empty_set_index().map_or(0.0, |e| a[e] + b[e] - a[e] * b[e]);
        prop_assert!(same + different >= 1.0 - empty - 1e-12);
    }

    #[test]
    fn predictions_are_mass_functions(
        c in 2usize..5, s in scheme(), seed in 0u64..1000, gated in any::<bool>(),
        x in prop::collection::vec(-50.0f64..50.0, 2 * 6),
    ) {
        let m = model(c, s, 2, seed, gated);
        let x = Array2::from_shape_vec((6, 2), x).unwrap();
        let part = m.predict(x.view()).unwrap();
        for row in part.masses().rows() {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let rough = part.rough_partition();
        for k in 0..c {
            prop_assert!(rough.lower[k].iter().all(|i| rough.upper[k].contains(i)));
        }
    }

    #[test]
    fn gate_never_lowers_empty_mass(
        beta0 in -5.0f64..5.0, beta1 in 0.01f64..5.0, s1 in -10.0f64..10.0, s2 in -10.0f64..10.0,
    ) {
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let g_lo = Gate::new(beta0, beta1, lo);
        let g_hi = Gate::new(beta0, beta1, hi);
        prop_assert!(g_lo.gamma <= g_hi.gamma);
        prop_assert!(g_lo.gamma > 0.0 && g_hi.gamma < 1.0);
    }

    #[test]
    fn bundle_round_trip_preserves_predictions(
        c in 2usize..4, s in scheme(), seed in 0u64..1000, gated in any::<bool>(),
    ) {
        let m = model(c, s, 3, seed, gated);
        let back = bundle::from_json(&bundle::to_json(&m).unwrap()).unwrap();
        prop_assert_eq!(&back, &m);
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.7);
        prop_assert_eq!(back.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
    }

    #[test]
    fn ari_is_symmetric_and_label_free(
        a in prop::collection::vec(0usize..4, 2..40), shift in 1usize..7,
    ) {
        let b: Vec<usize> = a.iter().map(|v| (v * 3 + shift) % 5).collect();
        let relabelled: Vec<usize> = a.iter().map(|v| v + shift * 10).collect();
        let ab = adjusted_rand_index(&a, &b).unwrap();
        prop_assert!((ab - adjusted_rand_index(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert!((adjusted_rand_index(&a, &relabelled).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_is_monotone_in_unit_interval(d0 in 0.01f64..100.0, a in 0.0f64..500.0, b in 0.0f64..500.0) {
        let phi = PhiTransform::with_delta0(d0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(phi.apply(lo) <= phi.apply(hi));
        prop_assert!((0.0..=1.0).contains(&phi.apply(hi)));
        prop_assert!((phi.apply(d0) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn partition_csv_reads_back(c in 2usize..4, seed in 0u64..100) {
        let m = model(c, FocalScheme::PairsPlus, 2, seed, true);
        let x = Array2::from_shape_fn((5, 2), |(i, j)| i as f64 * 1.5 - j as f64 * 4.0);
        let part: EvidentialPartition = m.predict(x.view()).unwrap();
        let mut buf = Vec::new();
        part.write_csv(&mut buf).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), &buf).unwrap();
        let table = nnevclus::io::read_partition(file.path()).unwrap();
        prop_assert_eq!(table.masses, part.masses().clone());
        prop_assert_eq!(table.labels, part.hard_partition());
    }
}

#[test]
fn gate_input_uses_libsvm_units() {
    let x = Array2::from_shape_fn((20, 2), |(i, j)| ((i * 5 + j * 11) % 7) as f64 * 0.3);
    let svm = OneClassSvm::fit_with(x.view(), 0.25, 0.8, 3).unwrap();
    let probe = ndarray::array![0.4, 1.1];
    let scaled = svm.gate_score(probe.view());
    assert!((scaled - 0.25 * 20.0 * svm.decision(probe.view())).abs() < 1e-12);
    let far = ndarray::array![1e3, -1e3];
    assert!((svm.gate_score(far.view()) + 5.0 * svm.offset).abs() < 1e-12);
}
