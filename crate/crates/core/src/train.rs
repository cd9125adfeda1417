//! Minibatch SGD with Nesterov momentum and windowed early stopping on
//! training accuracy.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{neg_log_sigmoid, sigmoid, FactoredTriplets, Family, WeightModel};
use crate::rng::stream_rng;

/// How two consecutive accuracy windows are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// Stop when the best accuracy in the latest window does not exceed the
    /// best accuracy in the window before it.
    #[default]
    WindowMax,
    /// Same comparison on window means.
    WindowMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience_window: usize,
    pub seed: u64,
    /// L2 coefficient; only read by the signed-diagonal family.
    pub lambda: f64,
    pub stop_rule: StopRule,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-5,
            momentum: 0.9,
            batch_size: 256,
            max_epochs: 1000,
            patience_window: 10,
            seed: 0,
            lambda: 0.0,
            stop_rule: StopRule::WindowMax,
        }
    }
}

impl TrainingConfig {
    /// Learning rate 1e-5 with momentum 0.9.
    pub fn standard() -> Self {
        TrainingConfig::default()
    }

    /// Learning rate 1e-9 with momentum 0.9, for the unconstrained family on
    /// raw 4096-d embeddings.
    pub fn raw_unconstrained() -> Self {
        TrainingConfig {
            learning_rate: 1e-9,
            ..TrainingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("{} is not a nonnegative real", self.learning_rate),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(
                "momentum",
                format!("{} is outside [0, 1)", self.momentum),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs", "must be positive"));
        }
        if self.patience_window == 0 {
            return Err(Error::invalid("patience_window", "must be positive"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("{} is not a nonnegative real", self.lambda),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
    /// The model has nothing to fit.
    NoParameters,
}

impl StopReason {
    pub fn tag(self) -> &'static str {
        match self {
            StopReason::EarlyStop => "early_stop",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::NoParameters => "no_parameters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean negative log-likelihood per training triplet after the epoch.
    pub loss: f64,
    pub train_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
}

impl TrainingHistory {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    /// Writes `epoch,loss,train_acc,seconds`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,train_acc,seconds")?;
        for r in &self.epochs {
            writeln!(
                out,
                "{},{},{},{}",
                r.epoch, r.loss, r.train_accuracy, r.seconds
            )?;
        }
        Ok(())
    }
}

/// Fraction of triplets where the human-chosen reference gets probability
/// strictly above one half.
pub fn epoch_accuracy(model: &WeightModel, data: &FactoredTriplets) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let hits = model
        .logits(data)
        .into_iter()
        .filter(|&z| sigmoid(z) > 0.5)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Mean log-probability of the human choices; always `≤ 0`.
pub fn mean_log_likelihood(model: &WeightModel, data: &FactoredTriplets) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let total: f64 = model.logits(data).into_iter().map(neg_log_sigmoid).sum();
    Ok(-total / data.len() as f64)
}

fn accuracy_and_loss(model: &WeightModel, data: &FactoredTriplets) -> (f64, f64) {
    let logits = model.logits(data);
    let m = logits.len() as f64;
    let hits = logits.iter().filter(|&&z| sigmoid(z) > 0.5).count();
    let nll: f64 = logits.iter().map(|&z| neg_log_sigmoid(z)).sum();
    (hits as f64 / m, nll / m)
}

fn should_stop(acc: &[f64], window: usize, rule: StopRule) -> bool {
    let t = acc.len();
    if t < 2 * window {
        return false;
    }
    let recent = &acc[t - window..];
    let previous = &acc[t - 2 * window..t - window];
    match rule {
        StopRule::WindowMax => {
            let best = |w: &[f64]| w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            best(recent) <= best(previous)
        }
        StopRule::WindowMean => {
            let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
            mean(recent) <= mean(previous)
        }
    }
}

/// Fits `model` on `data` and returns the final-epoch parameters.
///
/// Update per minibatch: `u ← μu − η∇L(θ + μu)`, `θ ← θ + u`, where `L` is
/// the summed triplet negative log-likelihood over the minibatch. Rows are
/// reshuffled every epoch from a stream keyed on `(seed, epoch)`.
pub fn train(
    mut model: WeightModel,
    data: &FactoredTriplets,
    config: &TrainingConfig,
) -> Result<(WeightModel, TrainingHistory)> {
    config.validate()?;
    if data.k != model.k() {
        return Err(Error::Dimension {
            expected: model.k(),
            got: data.k,
        });
    }
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let WeightModel::DiagonalSignedL2 { lambda, .. } = &mut model {
        *lambda = config.lambda;
    }
    if model.family() == Family::Identity {
        return Ok((
            model,
            TrainingHistory {
                epochs: Vec::new(),
                stop_reason: StopReason::NoParameters,
            },
        ));
    }

    let (lr, mu) = (config.learning_rate, config.momentum);
    let n_params = model.params().len();
    let mut velocity = vec![0.0; n_params];
    let mut lookahead = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut records = Vec::new();
    let mut accuracies = Vec::new();

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut stream_rng(config.seed, epoch as u64));

        for batch in order.chunks(config.batch_size) {
            for ((la, p), u) in lookahead
                .params_mut()
                .iter_mut()
                .zip(model.params())
                .zip(&velocity)
            {
                *la = p + mu * u;
            }
            let (_, grad) = lookahead.nll_and_gradient_rows(data, batch.iter().copied());
            for ((p, u), g) in model
                .params_mut()
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(&grad)
            {
                *u = mu * *u - lr * g;
                *p += *u;
            }
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                what: "non-finite parameters",
            });
        }

        let (acc, loss) = accuracy_and_loss(&model, data);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                what: "non-finite loss",
            });
        }
        records.push(EpochRecord {
            epoch,
            loss,
            train_accuracy: acc,
            seconds: started.elapsed().as_secs_f64(),
        });
        accuracies.push(acc);

        if should_stop(&accuracies, config.patience_window, config.stop_rule) {
            return Ok((
                model,
                TrainingHistory {
                    epochs: records,
                    stop_reason: StopReason::EarlyStop,
                },
            ));
        }
    }
    Ok((
        model,
        TrainingHistory {
            epochs: records,
            stop_reason: StopReason::MaxEpochs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(k: usize, m: usize, seed: u64) -> FactoredTriplets {
        let gen = |i: usize, salt: u64| crate::rng::uniform_at(seed ^ salt, i as u64) * 2.0 - 1.0;
        FactoredTriplets {
            k,
            a: (0..m * k).map(|i| gen(i, 1)).collect(),
            b: (0..m * k).map(|i| gen(i, 2)).collect(),
        }
    }

    #[test]
    fn window_rule() {
        let flat = vec![0.5; 20];
        assert!(!should_stop(&flat[..19], 10, StopRule::WindowMax));
        assert!(should_stop(&flat, 10, StopRule::WindowMax));
        let mut rising: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(!should_stop(&rising, 10, StopRule::WindowMax));
        rising[19] = 0.0;
        // best of last window (18) still exceeds best of previous (9)
        assert!(!should_stop(&rising, 10, StopRule::WindowMax));
        let mut dip = vec![1.0; 10];
        dip.extend(vec![0.9; 9]);
        dip.push(1.0);
        assert!(should_stop(&dip, 10, StopRule::WindowMax));
        assert!(should_stop(&dip, 10, StopRule::WindowMean));
    }

    #[test]
    fn zero_learning_rate_stops_at_twice_window() {
        let data = toy(3, 40, 1);
        let model = WeightModel::init(Family::Unconstrained, 3, 0.0);
        let cfg = TrainingConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let (out, hist) = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(out, model);
        assert_eq!(hist.epochs_run(), 20);
        assert_eq!(hist.stop_reason, StopReason::EarlyStop);
    }

    #[test]
    fn identity_needs_no_epochs() {
        let data = toy(2, 10, 2);
        let (m, hist) = train(
            WeightModel::init(Family::Identity, 2, 0.0),
            &data,
            &TrainingConfig::default(),
        )
        .unwrap();
        assert_eq!(m, WeightModel::Identity { k: 2 });
        assert_eq!(hist.epochs_run(), 0);
        assert_eq!(hist.stop_reason, StopReason::NoParameters);
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy(4, 200, 3);
        let cfg = TrainingConfig {
            learning_rate: 1e307,
            ..Default::default()
        };
        let err = train(
            WeightModel::init(Family::Unconstrained, 4, 0.0),
            &data,
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }), "{err}");
        assert!(err.to_string().contains("smaller learning rate"));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = toy(3, 300, 4);
        let cfg = TrainingConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            max_epochs: 30,
            seed: 11,
            ..Default::default()
        };
        let run = || train(WeightModel::init(Family::Symmetric, 3, 0.0), &data, &cfg).unwrap();
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(m1, m2);
        assert_eq!(
            h1.epochs.iter().map(|r| r.loss).collect::<Vec<_>>(),
            h2.epochs.iter().map(|r| r.loss).collect::<Vec<_>>()
        );
    }

    #[test]
    fn history_matches_returned_model() {
        let data = toy(3, 300, 5);
        let cfg = TrainingConfig {
            learning_rate: 1e-2,
            batch_size: 64,
            max_epochs: 25,
            ..Default::default()
        };
        let (m, h) = train(
            WeightModel::init(Family::DiagonalNonneg, 3, 0.0),
            &data,
            &cfg,
        )
        .unwrap();
        assert_eq!(
            h.epochs.last().unwrap().train_accuracy,
            epoch_accuracy(&m, &data).unwrap()
        );
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        let data = toy(4, 64, 6);
        for family in [
            Family::DiagonalNonneg,
            Family::DiagonalSignedL2,
            Family::Symmetric,
            Family::Unconstrained,
        ] {
            let model = WeightModel::init(family, 4, 0.1);
            let (before, _) = model.nll_and_gradient_rows(&data, 0..64);
            let cfg = TrainingConfig {
                learning_rate: 1e-6,
                momentum: 0.0,
                batch_size: 64,
                max_epochs: 1,
                lambda: 0.1,
                ..Default::default()
            };
            let (after_model, _) = train(model, &data, &cfg).unwrap();
            let (after, _) = after_model.nll_and_gradient_rows(&data, 0..64);
            assert!(after <= before, "{family}: {after} > {before}");
        }
    }

    #[test]
    fn accuracy_tie_and_counting() {
        let m = WeightModel::Identity { k: 1 };
        let data = FactoredTriplets {
            k: 1,
            a: vec![1.0, 1.0, 1.0, 1.0],
            b: vec![2.0, 0.5, -1.0, 3.0],
        };
        assert_eq!(epoch_accuracy(&m, &data).unwrap(), 0.75);
        let ties = FactoredTriplets {
            k: 1,
            a: vec![1.0, 2.0],
            b: vec![0.0, 0.0],
        };
        assert_eq!(epoch_accuracy(&m, &ties).unwrap(), 0.0);
        let empty = FactoredTriplets {
            k: 1,
            a: vec![],
            b: vec![],
        };
        assert!(matches!(epoch_accuracy(&m, &empty), Err(Error::Empty(_))));
    }

    #[test]
    fn mean_log_likelihood_values() {
        let m = WeightModel::Identity { k: 1 };
        let half = FactoredTriplets {
            k: 1,
            a: vec![1.0, 1.0],
            b: vec![0.0, 0.0],
        };
        assert!((mean_log_likelihood(&m, &half).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
        // σ(z) = 0.8 at z = ln 4
        let one = FactoredTriplets {
            k: 1,
            a: vec![1.0],
            b: vec![4f64.ln()],
        };
        assert!((mean_log_likelihood(&m, &one).unwrap() - 0.8f64.ln()).abs() < 1e-12);
        let sure = FactoredTriplets {
            k: 1,
            a: vec![1.0],
            b: vec![40.0],
        };
        let ll = mean_log_likelihood(&m, &sure).unwrap();
        assert!(ll < 0.0 && ll > -1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig {
            momentum: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainingConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainingConfig {
            learning_rate: f64::NAN,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(TrainingConfig::raw_unconstrained().learning_rate, 1e-9);
        assert_eq!(TrainingConfig::standard().momentum, 0.9);
    }
}
