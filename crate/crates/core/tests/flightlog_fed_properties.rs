use proptest::prelude::*;
use skyway::fed::*;
use skyway::flightlog::*;

fn column_stats(rows: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
    let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn model(weights: Vec<f64>, bias: f64) -> RegressionModel {
    RegressionModel { weights, bias }
}

proptest! {
    #[test]
    fn standardized_columns_are_unit(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..40)) {
        let columns: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let scaler = standardize_fit(&columns).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| standardize_apply(&scaler, r).unwrap()).collect();
        for j in 0..3 {
            let (m, s) = column_stats(&z, j);
            if scaler.constant[j] {
                prop_assert!(z.iter().all(|r| r[j] == 0.0));
            } else {
                prop_assert!(m.abs() < 1e-9, "mean {m}");
                prop_assert!((s - 1.0).abs() < 1e-9, "std {s}");
            }
        }
    }

    #[test]
    fn range_merge_preserves_bucket_means(points in proptest::collection::vec((0.0f64..20.0, 0usize..FEATURE_COUNT, -50.0f64..50.0), 0..200)) {
        let raw: Vec<RawLogPoint> = points.iter().map(|&(t, f, v)| RawLogPoint { timestamp: t, feature: f, value: v }).collect();
        let merged = range_merge(&raw);
        for w in merged.windows(2) {
            prop_assert!(w[0].second < w[1].second);
        }
        for fv in &merged {
            for j in 0..FEATURE_COUNT {
                let inside: Vec<f64> = raw
                    .iter()
                    .filter(|p| p.feature == j && p.timestamp.floor() as i64 == fv.second)
                    .map(|p| p.value)
                    .collect();
                if !inside.is_empty() {
                    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
                    prop_assert!((fv.values[j] - mean).abs() < 1e-9);
                }
            }
        }
        let seconds: std::collections::BTreeSet<i64> = raw.iter().map(|p| p.timestamp.floor() as i64).collect();
        prop_assert_eq!(merged.len(), seconds.len());
    }

    #[test]
    fn fed_average_is_permutation_invariant(
        ms in proptest::collection::vec((proptest::collection::vec(-1e6f64..1e6, 4), -1e6f64..1e6), 1..8),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let models: Vec<RegressionModel> = ms.into_iter().map(|(w, b)| model(w, b)).collect();
        let mut shuffled = models.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = fed_average(&models).unwrap();
        let b = fed_average(&shuffled).unwrap();
        prop_assert_eq!(&a, &b);
        let copies = vec![models[0].clone(); models.len()];
        let c = fed_average(&copies).unwrap();
        for (x, y) in c.weights.iter().zip(&models[0].weights) {
            prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn weighting_equals_duplication_on_random_data(
        old in proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, 3), -1.0f64..1.0), 1..12),
        new in proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, 3), -1.0f64..1.0), 1..6),
        w in 1usize..6,
    ) {
        let sample = |(x, y): &(Vec<f64>, f64)| Sample { x: x.clone(), y: *y };
        let set = TrainingSet { old: old.iter().map(sample).collect(), new: new.iter().map(sample).collect() };
        let mut dup = set.old.clone();
        for _ in 0..w {
            dup.extend(set.new.iter().cloned());
        }
        let flat = TrainingSet { old: dup, new: vec![] };
        let cfg = TrainConfig { epochs: 60, lr_decay_every: 20, history_weight: w, ..Default::default() };
        let a = local_train(&RegressionModel::zeros(3), &set, &cfg).unwrap();
        let b = local_train(&RegressionModel::zeros(3), &flat, &TrainConfig { history_weight: 1, ..cfg }).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn hand_evaluated_standardization() {
    let s = standardize_fit(&[vec![1.0, 2.0, 3.0]]).unwrap();
    assert!((s.mean[0] - 2.0).abs() < 1e-12);
    assert!((s.std[0] - 0.816496580927726).abs() < 1e-12);
    let z: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|x| standardize_apply(&s, &[*x]).unwrap()[0]).collect();
    assert!((z[0] + 1.224744871391589).abs() < 1e-9 && z[1].abs() < 1e-12 && (z[2] - 1.224744871391589).abs() < 1e-9);
    let twice = standardize_apply(&s, &standardize_apply(&s, &[3.0]).unwrap()).unwrap()[0];
    assert!((twice - 1.224744871391589).abs() > 1e-3);
}

#[test]
fn synthetic_logs_are_seeded_and_consistent() {
    let a = generate_synthetic_logs(4, 11, &DriftConfig::default());
    let b = generate_synthetic_logs(4, 11, &DriftConfig::default());
    assert_eq!(a, b);
    let c = generate_synthetic_logs(4, 12, &DriftConfig::default());
    assert_ne!(a, c);
    for s in a.iter().chain(&c) {
        assert!(s.vectors.windows(2).all(|w| w[0].second < w[1].second));
        let duration = (s.vectors.last().unwrap().second - s.vectors[0].second + 1) as f64;
        assert!(s.label_ttf >= 0.0 && s.label_uptime >= 0.0);
        assert!(s.label_ttf <= duration);
    }
}

fn ttf_sets(series: &[LabeledSeries], scaler: &Scaler, scale: &TargetScale) -> Vec<Sample> {
    DroneHistory { old: series.to_vec(), new: vec![] }.training_set(scaler, Target::Ttf, scale, 2).unwrap().old
}

#[test]
fn synthetic_logs_are_learnable() {
    let series = generate_synthetic_logs(20, 5, &DriftConfig::default());
    let (train, test) = series.split_at(16);
    let scaler = Scaler::fit_series(train.iter()).unwrap();
    let fm = FeatureModel::default();
    let scale = TargetScale { horizon_s: fm.horizon_s, uptime_ref_s: fm.uptime_ref_s };
    let tr = ttf_sets(train, &scaler, &scale);
    let te = ttf_sets(test, &scaler, &scale);
    let set = TrainingSet { old: tr.clone(), new: vec![] };
    let m = local_train(&RegressionModel::zeros(FEATURE_COUNT), &set, &TrainConfig { epochs: 1500, ..Default::default() }).unwrap();
    let mut ys: Vec<f64> = tr.iter().map(|s| s.y).collect();
    let baseline = median(&mut ys);
    let mae = |f: &dyn Fn(&Sample) -> f64| te.iter().map(|s| (f(s) - s.y).abs()).sum::<f64>() / te.len() as f64;
    let model_mae = mae(&|s| m.predict(&s.x));
    let base_mae = mae(&|_| baseline);
    assert!(model_mae < base_mae, "model {model_mae} vs baseline {base_mae}");
}

#[test]
fn predicted_onset_lands_in_the_right_third() {
    // Readings taken within one segment before onset: the predicted time to
    // failure should fall in the same third of the segment more often than
    // chance.
    let series = generate_synthetic_logs(24, 21, &DriftConfig::default());
    let (train, test) = series.split_at(18);
    let cfg = CorpusTrainConfig { drones: 3, new_fraction: 0.0, stride: 2, ..Default::default() };
    let trained = train_corpus(train, &cfg).unwrap();
    let segment = cfg.scale.horizon_s * 0.75;
    let mut pairs = Vec::new();
    for s in test {
        let start = s.vectors[0].second;
        for v in &s.vectors {
            let truth = s.label_ttf - (v.second - start) as f64;
            let x = trained.scaler.apply_vector(v).unwrap();
            let pred = trained.models.ft.predict(&x).clamp(0.0, 1.0) * cfg.scale.horizon_s;
            pairs.push((pred, truth));
        }
    }
    let acc = interval_accuracy(&pairs, segment).unwrap();
    assert!(acc > 0.5, "interval accuracy {acc}");
}

#[test]
fn one_drone_round_is_centralized_training() {
    let series = generate_synthetic_logs(3, 2, &DriftConfig::default());
    let scaler = Scaler::fit_series(series.iter()).unwrap();
    let fm = FeatureModel::default();
    let scale = TargetScale { horizon_s: fm.horizon_s, uptime_ref_s: fm.uptime_ref_s };
    let h = DroneHistory { old: series[..2].to_vec(), new: series[2..].to_vec() };
    let ft = h.training_set(&scaler, Target::Ttf, &scale, 3).unwrap();
    let up = h.training_set(&scaler, Target::Uptime, &scale, 3).unwrap();
    let cfg = TrainConfig { epochs: 200, ..Default::default() };
    let drone = DroneData { drone_id: "d0".into(), ft: ft.clone(), uptime: up, latest: Some(ft.old[0].x.clone()) };
    let (global, preds) = federated_round(&[drone], &PredictorModels::zeros(), &cfg, &scale).unwrap();
    let central = local_train(&RegressionModel::zeros(FEATURE_COUNT), &ft, &cfg).unwrap();
    assert_eq!(global.ft, central);
    assert_eq!(preds.len(), 1);
    assert!(preds[0].predicted_ft >= 0.0 && preds[0].predicted_uptime >= 0.0);
}

#[test]
fn continual_history_grows_monotonically() {
    let x = vec![0.5; FEATURE_COUNT];
    let mut drones = vec![DroneData {
        drone_id: "d0".into(),
        ft: TrainingSet { old: vec![Sample { x: x.clone(), y: 0.5 }], new: vec![] },
        ..Default::default()
    }];
    let cfg = TrainConfig { epochs: 20, ..Default::default() };
    let scale = TargetScale { horizon_s: 120.0, uptime_ref_s: 150.0 };
    let mut global = PredictorModels::zeros();
    let mut prev: Vec<Sample> = Vec::new();
    for node in 0..3 {
        let log = SegmentLog { ft: vec![Sample { x: x.clone(), y: 0.1 * node as f64 }], uptime: vec![], latest: Some(x.clone()) };
        let (g, _) = continual_update(&mut drones, vec![log], &global, &cfg, &scale).unwrap();
        global = g;
        let now = drones[0].ft.new.clone();
        assert!(now.len() > prev.len() && now[..prev.len()] == prev[..]);
        prev = now;
    }
}
