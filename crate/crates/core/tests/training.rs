use powermat_core::data::{split, synth_generate, Dataset, EncodingScheme, RatingEvent, RatingScale, SynthSpec};
use powermat_core::kernel::{predict_linear, ContextVector, GradientMode, Hyperparams, PredictionRule};
use powermat_core::trainers::{predict, train, train_observed, Algorithm, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Noiseless rank-1 data: every (user, item) pair rated `r_max * a_u * b_i`
/// with planted factors in [0.5, 1].
fn planted_rank_one(n_users: usize, n_items: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n_users).map(|_| rng.random_range(0.5..1.0)).collect();
    let b: Vec<f64> = (0..n_items).map(|_| rng.random_range(0.5..1.0)).collect();
    let mut events = Vec::new();
    for (u, au) in a.iter().enumerate() {
        for (i, bi) in b.iter().enumerate() {
            events.push(RatingEvent {
                user_id: format!("u{u}"),
                item_id: format!("i{i}"),
                rating: 5.0 * au * bi,
                context_attrs: vec![1],
            });
        }
    }
    Dataset::fit(events, vec!["time".into()], EncodingScheme::OneHot, RatingScale::default()).unwrap()
}

fn train_mse(ds: &Dataset, cfg: &TrainConfig) -> f64 {
    let (model, _) = train(ds, cfg).unwrap();
    let sum: f64 = ds
        .events()
        .iter()
        .map(|ev| {
            let u = &model.user_embeddings[model.users.get_index_of(&ev.user_id).unwrap()];
            let v = &model.item_embeddings[model.items.get_index_of(&ev.item_id).unwrap()];
            (predict_linear(u, v, 5.0).unwrap() - ev.rating).powi(2)
        })
        .sum();
    sum / ds.len() as f64
}

#[test]
fn classic_mf_recovers_planted_rank_one() {
    let ds = planted_rank_one(30, 30, 3);
    let best = [0.05, 0.1, 0.2, 0.5]
        .into_iter()
        .map(|gamma| {
            let hyper = Hyperparams { k: 1, gamma, sigma_u: 1e3, sigma_v: 1e3, ..Hyperparams::default() };
            train_mse(&ds, &TrainConfig { epochs: 200, ..TrainConfig::new(Algorithm::ClassicMf, hyper) })
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 1e-3, "best train MSE {best}");
}

fn synth() -> Dataset {
    let spec = SynthSpec { n_users: 40, n_items: 60, n_events: 800, context_columns: vec![4, 3, 2], ..SynthSpec::default() };
    synth_generate(&spec, RatingScale::default()).unwrap()
}

fn powermat_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        ..TrainConfig::new(Algorithm::PowerMat, Hyperparams { gamma: 1e-4, ..Hyperparams::default() })
    }
}

#[test]
fn rating_blind_training_never_reads_ratings() {
    let ds = synth();
    let cfg = TrainConfig { rating_blind: true, ..powermat_config(10) };
    let (model, report) = train(&ds, &cfg).unwrap();
    assert_eq!(report.rating_reads, 0);
    assert_eq!(report.steps, 8000);
    assert!(model.is_finite());
    assert!(report.loss_trace.iter().all(|l| l.is_finite()));
    // ratings cannot influence the result
    let shuffled: Vec<RatingEvent> = ds
        .events()
        .iter()
        .map(|e| RatingEvent { rating: 6.0 - e.rating, ..e.clone() })
        .collect();
    let other = Dataset::new(shuffled, ds.encoder().clone(), ds.scale()).unwrap();
    assert_eq!(train(&other, &cfg).unwrap().0, model);
}

#[test]
fn verbatim_beta_trace_is_non_increasing() {
    let cfg = powermat_config(15);
    assert_eq!(cfg.hyper.gradient_mode, GradientMode::Verbatim);
    let mut betas = vec![0.0];
    train_observed(&synth(), &cfg, |s| betas.push(s.beta)).unwrap();
    assert_eq!(betas.len(), 12_001);
    assert!(betas.windows(2).all(|w| w[1] <= w[0]));
    assert!(betas.last().unwrap() < &0.0);
}

#[test]
fn derived_mode_trains() {
    let mut cfg = powermat_config(5);
    cfg.hyper.gradient_mode = GradientMode::Derived;
    cfg.hyper.gamma = 1e-3;
    let (model, report) = train(&synth(), &cfg).unwrap();
    assert!(model.is_finite());
    assert_eq!(report.loss_trace.len(), 5);
}

#[test]
fn same_seeds_same_model() {
    let ds = synth();
    for alg in Algorithm::ALL {
        let hyper = Hyperparams { gamma: if alg == Algorithm::PowerMat { 1e-4 } else { 0.01 }, ..Hyperparams::default() };
        let cfg = TrainConfig { epochs: 3, shuffle_seed: 9, init_seed: 4, ..TrainConfig::new(alg, hyper) };
        let (a, ra) = train(&ds, &cfg).unwrap();
        let (b, rb) = train(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.loss_trace, rb.loss_trace);
        let (c, _) = train(&ds, &TrainConfig { shuffle_seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn cold_start_user_power_rule_depends_on_context() {
    let ds = synth();
    let (train_set, _) = split(&ds, 0.2, 1).unwrap();
    let cfg = TrainConfig { rating_blind: true, ..powermat_config(10) };
    let (mut model, _) = train(&train_set, &cfg).unwrap();
    model.hyper.prediction_rule = PredictionRule::Power;
    assert!(model.alpha.iter().any(|&a| a != 0.0));
    let enc = train_set.encoder();
    let item = train_set.items().get_index(0).unwrap();
    let a = predict(&model, "new-visitor", item, &enc.encode(&[1, 1, 1]).unwrap()).unwrap();
    let b = predict(&model, "new-visitor", item, &enc.encode(&[4, 3, 2]).unwrap()).unwrap();
    assert!(a.is_finite() && b.is_finite());
    assert_ne!(a, b);
    assert!(predict(&model, "new-visitor", item, &ContextVector::zeros(3)).is_err());
}
