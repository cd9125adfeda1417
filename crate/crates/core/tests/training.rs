mod common;

use common::*;
use tam::synth::{generate, SynthSpec, Temperature};
use tam::*;

fn toy_triplets(k: usize, m: usize, seed: u64) -> FactoredTriplets {
    let mut r = rng(seed);
    FactoredTriplets::from_batch(&random_batch(&mut r, k, m)).unwrap()
}

/// Full-batch gradient descent on `−Σ log σ(aᵀWb)` written out by hand.
fn plain_sgd(data: &FactoredTriplets, lr: f64, epochs: usize) -> Vec<f64> {
    let mut w = [1.0, 0.0, 0.0, 1.0];
    for _ in 0..epochs {
        let mut grad = [0.0; 4];
        for i in 0..data.len() {
            let (a, b) = (data.a(i), data.b(i));
            let z = a[0] * (w[0] * b[0] + w[1] * b[1]) + a[1] * (w[2] * b[0] + w[3] * b[1]);
            let g = -1.0 / (1.0 + z.exp());
            for r in 0..2 {
                for c in 0..2 {
                    grad[2 * r + c] += g * a[r] * b[c];
                }
            }
        }
        for j in 0..4 {
            w[j] -= lr * grad[j];
        }
    }
    w.to_vec()
}

#[test]
fn zero_momentum_full_batch_matches_plain_gradient_descent() {
    let data = toy_triplets(2, 60, 4);
    let config = TrainingConfig {
        learning_rate: 0.01,
        momentum: 0.0,
        batch_size: 1000,
        max_epochs: 15,
        patience_window: 50,
        ..Default::default()
    };
    let (model, history) = train(
        WeightModel::init(Family::Unconstrained, 2, 0.0),
        &data,
        &config,
    )
    .unwrap();
    assert_eq!(history.epochs_run(), 15);
    let oracle = plain_sgd(&data, 0.01, 15);
    for (got, want) in model.params().iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn separable_single_triplet_follows_scalar_nesterov() {
    // q = 1, r1 = 1, r2 = 0, human picks r1: the logit is |v|.
    let n = 10;
    let batch = TripletBatch {
        k: 1,
        q: vec![1.0; n],
        r1: vec![1.0; n],
        r2: vec![0.0; n],
        chosen: vec![Choice::Ref1; n],
    };
    let data = FactoredTriplets::from_batch(&batch).unwrap();
    let config = TrainingConfig {
        learning_rate: 0.1,
        momentum: 0.9,
        max_epochs: 10,
        ..Default::default()
    };
    let (model, history) = train(
        WeightModel::init(Family::DiagonalNonneg, 1, 0.0),
        &data,
        &config,
    )
    .unwrap();

    let (mut v, mut u) = (1.0f64, 0.0f64);
    let mut losses = Vec::new();
    for _ in 0..10 {
        let look = v + 0.9 * u;
        let grad = -(n as f64) * look.signum() * logistic(-look.abs());
        u = 0.9 * u - 0.1 * grad;
        v += u;
        losses.push((1.0 + (-v.abs()).exp()).ln());
    }
    assert!(
        (model.params()[0] - v).abs() < 1e-12,
        "{} vs {v}",
        model.params()[0]
    );
    let recorded: Vec<f64> = history.epochs.iter().map(|e| e.loss).collect();
    for (got, want) in recorded.iter().zip(&losses) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!(recorded.windows(2).all(|w| w[1] < w[0]), "{recorded:?}");
    assert_eq!(history.epochs.last().unwrap().train_accuracy, 1.0);
}

#[test]
fn nested_families_order_training_loss() {
    let mut spec = SynthSpec::new(20, 6, 3, 2000, 9);
    spec.asymmetry = 0.5;
    spec.temperature = Temperature::Fixed(0.3);
    let data = generate(&spec).unwrap();
    let projected = data.truth.pca.project_table(&data.embeddings).unwrap();
    let triplets = data.dataset.resolve(&data.embeddings).unwrap();
    let train_set = FactoredTriplets::from_indexed(&projected, &triplets);
    let config = TrainingConfig {
        learning_rate: 2e-4,
        momentum: 0.9,
        batch_size: 2000,
        max_epochs: 3000,
        patience_window: 3000,
        ..Default::default()
    };
    let nll: Vec<f64> = [
        Family::Identity,
        Family::DiagonalNonneg,
        Family::Symmetric,
        Family::Unconstrained,
    ]
    .into_iter()
    .map(|f| {
        let (m, _) = train(WeightModel::init(f, 3, 0.0), &train_set, &config).unwrap();
        -mean_log_likelihood(&m, &train_set).unwrap()
    })
    .collect();
    for w in nll.windows(2) {
        assert!(w[1] <= w[0] + 1e-3, "{nll:?}");
    }
}

#[test]
fn training_is_bit_reproducible() {
    let data = toy_triplets(3, 700, 5);
    let config = TrainingConfig {
        learning_rate: 1e-3,
        max_epochs: 30,
        seed: 77,
        ..Default::default()
    };
    for family in Family::ALL {
        let run = || {
            let mut c = config.clone();
            c.lambda = 0.5;
            train(WeightModel::init(family, 3, 0.0), &data, &c).unwrap()
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(m1, m2);
        let strip = |h: &TrainingHistory| {
            h.epochs
                .iter()
                .map(|e| (e.loss, e.train_accuracy))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&h1), strip(&h2));
    }
}

#[test]
fn small_full_batch_step_does_not_increase_loss() {
    let data = toy_triplets(4, 300, 6);
    let mut r = rng(6);
    for family in Family::ALL {
        let model = random_model(&mut r, family, 4);
        let before = model.nll_and_gradient_rows(&data, 0..data.len()).0;
        let config = TrainingConfig {
            learning_rate: 1e-6,
            momentum: 0.0,
            batch_size: data.len(),
            max_epochs: 1,
            lambda: model.lambda(),
            ..Default::default()
        };
        let (after, _) = train(model, &data, &config).unwrap();
        assert!(
            after.nll_and_gradient_rows(&data, 0..data.len()).0 <= before,
            "{family}"
        );
    }
}
