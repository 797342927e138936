mod common;

use micronas::baselines::*;
use micronas::data::{plan_splits, segment, Sample, SplitConfig, WindowConfig};
use micronas::seed;
use proptest::prelude::*;
use rand::Rng as _;

/// Noisy two-class rows with `falls` positives out of `n`.
fn noisy(n: usize, falls: usize, seed_value: u64) -> (Vec<Sample>, Vec<u8>) {
    let mut rng = seed::rng(seed_value);
    let y: Vec<u8> = (0..n)
        .map(|i| u8::from(i % (n / falls) == 0 && i / (n / falls) < falls))
        .collect();
    let x = y
        .iter()
        .map(|&l| {
            let shift = if l == 1 { 1.5 } else { 0.0 };
            std::array::from_fn(|c| rng.gen_range(-1.0..1.0) + if c < 2 { shift } else { 0.0 })
        })
        .collect();
    (x, y)
}

fn params(n_estimators: usize, max_depth: usize) -> TreeParams {
    TreeParams {
        n_estimators,
        max_depth,
        learning_rate: 0.5,
        max_features: MaxFeatures::Sqrt,
    }
}

#[test]
fn single_stump_fits_axis_separable_rows() {
    // Two clusters on feature 3 with a wide gap, so any balanced draw finds it.
    let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 35)).collect();
    let x: Vec<Sample> = (0..40)
        .map(|i| [0.0, 0.0, 0.0, (i % 7) as f64 / 7.0 + 10.0 * f64::from(y[i]), 1.0, 1.0])
        .collect();
    let p = TreeParams {
        n_estimators: 1,
        max_depth: 1,
        learning_rate: 1.0,
        max_features: MaxFeatures::All,
    };
    let m = train_rusboost(&x, &y, &p, 3).unwrap();
    assert_eq!(m.learners.len(), 1);
    assert_eq!(m.predict_samples(&x), y);
}

#[test]
fn every_round_fits_a_balanced_set() {
    let (x, y) = noisy(2000, 60, 1);
    let m = train_rusboost(&x, &y, &params(25, 4), 8).unwrap();
    assert!(!m.learners.is_empty());
    for l in &m.learners {
        assert!((l.fitted_adl as i64 - l.fitted_fall as i64).abs() <= 1);
        assert_eq!(l.fitted_fall, 60);
        assert!(l.weight.is_finite());
    }
}

#[test]
fn weighted_undersampler_prefers_heavy_rows() {
    let y: Vec<u8> = (0..1000).map(|i| u8::from(i < 10)).collect();
    let mut w = vec![1e-6; 1000];
    for v in w.iter_mut().skip(10).take(10) {
        *v = 1.0;
    }
    let rows: Vec<usize> = (0..1000).collect();
    let kept = undersample(&rows, &y, &w, &mut seed::rng(0));
    assert_eq!(kept, (0..20).collect::<Vec<_>>());
}

#[test]
fn fixed_seed_repeats_and_other_seed_differs() {
    let (x, y) = noisy(1500, 50, 2);
    let p = params(15, 5);
    let a = train_rusboost(&x, &y, &p, 4).unwrap();
    assert_eq!(a, train_rusboost(&x, &y, &p, 4).unwrap());
    assert_ne!(a, train_rusboost(&x, &y, &p, 5).unwrap());
    let e = train_easyensemble(&x, &y, &p, 3, 4).unwrap();
    assert_eq!(e, train_easyensemble(&x, &y, &p, 3, 4).unwrap());
    assert_eq!(
        a.predict_samples(&x),
        train_rusboost(&x, &y, &p, 4).unwrap().predict_samples(&x)
    );
}

#[test]
fn balanced_rusboost_is_adaboost() {
    let (x, y) = noisy(400, 200, 3);
    assert_eq!(y.iter().filter(|&&l| l == 1).count(), 200);
    let p = params(12, 3);
    let rus = train_rusboost(&x, &y, &p, 21).unwrap();
    let ada = train_adaboost(&x, &y, &p, 21).unwrap();
    assert_eq!(rus.learners.len(), ada.learners.len());
    for (r, a) in rus.learners.iter().zip(&ada.learners) {
        assert_eq!(r.weight.to_bits(), a.weight.to_bits());
        assert_eq!(r.tree, a.tree);
    }
}

#[test]
fn single_bag_is_adaboost_on_that_bag() {
    let (x, y) = noisy(1200, 40, 4);
    let p = params(8, 3);
    let easy = train_easyensemble(&x, &y, &p, 1, 13).unwrap();
    let bag = &easyensemble_bags(&y, 1, 13)[0];
    let bx: Vec<Sample> = bag.iter().map(|&i| x[i]).collect();
    let by: Vec<u8> = bag.iter().map(|&i| y[i]).collect();
    let ada = train_adaboost(&bx, &by, &p, seed::derive(13, 0)).unwrap();
    assert_eq!(easy.learners.len(), ada.learners.len());
    for (e, a) in easy.learners.iter().zip(&ada.learners) {
        assert_eq!(e.weight.to_bits(), a.weight.to_bits());
        assert_eq!(e.tree, a.tree);
    }
    assert_eq!(easy.predict_samples(&x), ada.predict_samples(&x));
}

#[test]
fn bags_use_independent_draws() {
    let (_, y) = noisy(5000, 50, 5);
    let bags = easyensemble_bags(&y, 6, 77);
    for b in &bags {
        assert_eq!(b.len(), 100);
        assert_eq!(b.iter().filter(|&&i| y[i] == 1).count(), 50);
    }
    let adl = |b: &Vec<usize>| {
        b.iter()
            .copied()
            .filter(|&i| y[i] == 0)
            .collect::<std::collections::BTreeSet<_>>()
    };
    let mut shared = 0;
    for i in 0..bags.len() {
        for j in i + 1..bags.len() {
            assert_ne!(adl(&bags[i]), adl(&bags[j]));
            shared += adl(&bags[i]).intersection(&adl(&bags[j])).count();
        }
    }
    // Expected overlap per pair is 50 × 50 / 4950 ≈ 0.5.
    assert!(shared < 30, "{shared}");
}

#[test]
fn balanced_bags_cover_everything() {
    let y: Vec<u8> = (0..300).map(|i| (i % 2) as u8).collect();
    for bag in easyensemble_bags(&y, 3, 1) {
        assert_eq!(bag, (0..300).collect::<Vec<_>>());
    }
}

#[test]
fn estimator_budget_is_shared_between_bags() {
    let (x, y) = noisy(800, 40, 6);
    let m = train_easyensemble(&x, &y, &params(10, 2), 4, 0).unwrap();
    assert_eq!(m.n_bags, 4);
    assert!(m.learners.len() <= 10);
    let few = train_easyensemble(&x, &y, &params(3, 2), 10, 0).unwrap();
    assert_eq!(few.n_bags, 3);
}

#[test]
fn single_class_is_rejected() {
    let x = vec![[0.0; 6]; 10];
    assert!(train_rusboost(&x, &[0; 10], &params(5, 2), 0).is_err());
    assert!(train_easyensemble(&x, &[1; 10], &params(5, 2), 2, 0).is_err());
}

#[test]
fn serialization_round_trips() {
    let (x, y) = noisy(1000, 40, 7);
    for m in [
        train_rusboost(&x, &y, &params(10, 6), 1).unwrap(),
        train_easyensemble(&x, &y, &params(12, 4), 3, 1).unwrap(),
    ] {
        let bytes = ensemble_to_bytes(&m).unwrap();
        assert_eq!(&bytes[..4], b"MNEN");
        let back = ensemble_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert!(ensemble_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ensemble_from_bytes(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ensemble_from_bytes(&bad).is_err());
    }
}

#[test]
fn saved_file_loads() {
    let (x, y) = noisy(600, 30, 8);
    let m = train_rusboost(&x, &y, &params(5, 3), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mnen");
    save_ensemble(&m, &path).unwrap();
    assert_eq!(load_ensemble(&path).unwrap(), m);
}

#[test]
fn smoothing_lines_up_with_segmentation() {
    let cfg = WindowConfig::default();
    let mut rng = seed::rng(9);
    for _ in 0..200 {
        let t = rng.gen_range(120..3000);
        let samples = vec![[0.0; 6]; t];
        let labels: Vec<u8> = (0..t).map(|_| rng.gen_range(0..2)).collect();
        let windows = segment(&samples, &labels, cfg, &"p".into()).unwrap();
        let smoothed = smooth_predictions(&labels, cfg).unwrap();
        assert_eq!(smoothed.len(), windows.len());
        assert_eq!(smoothed, windows.iter().map(|w| w.label).collect::<Vec<_>>());
        assert_eq!(smoothed.len(), (t - 120) / 12 + 1);
    }
}

#[test]
fn tuning_picks_the_best_trial_deterministically() {
    let ds = common::small_dataset(6, false, 10);
    let plan = &plan_splits(
        &ds,
        SplitConfig {
            val_amputees: 1,
            val_controls: 1,
        },
        10,
    )
    .unwrap()[0];
    let train = plan.train_samples(&ds).unwrap();
    let val = plan.validation_signals(&ds).unwrap();
    let config = TuneConfig {
        n_trials: 3,
        master_seed: 5,
        max_train_samples: Some(4000),
        max_estimators: Some(10),
        jobs: 1,
        ..Default::default()
    };
    let out = tune_ensemble(&config, &train, &val, WindowConfig::default()).unwrap();
    assert_eq!(out.trials.len(), 3);
    let best = &out.trials[out.best];
    assert!(out.trials.iter().all(|t| t.val_f1 <= best.val_f1));
    assert_eq!(out.model.params, best.params);
    assert!(out.trials.iter().all(|t| t.params.n_estimators <= 10));
    let again = tune_ensemble(&TuneConfig { jobs: 2, ..config }, &train, &val, WindowConfig::default()).unwrap();
    assert_eq!(again.trials, out.trials);
    assert_eq!(again.model, out.model);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_params_stay_in_range(s in any::<u64>()) {
        let p = TreeParams::sample(&mut seed::rng(s));
        prop_assert!(p.in_tuning_range());
        prop_assert!(p.validate().is_ok());
    }

    #[test]
    fn scores_are_probabilities(s in 0u64..1000) {
        let (x, y) = noisy(300, 30, s);
        // A chance-level first round is reported, never papered over.
        let m = match train_rusboost(&x, &y, &params(4, 3), s) {
            Ok(m) => m,
            Err(e) => {
                prop_assert!(matches!(e, micronas::Error::Data(_)), "{e}");
                return Ok(());
            }
        };
        for row in &x {
            let v = m.score(row);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
