#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tam::{Choice, Family, TripletBatch, WeightModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn random_batch(rng: &mut ChaCha8Rng, k: usize, n: usize) -> TripletBatch {
    TripletBatch {
        k,
        q: normals(rng, n * k),
        r1: normals(rng, n * k),
        r2: normals(rng, n * k),
        chosen: (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Choice::Ref1
                } else {
                    Choice::Ref2
                }
            })
            .collect(),
    }
}

/// Random parameters kept away from the kink of `|v|` for the nonneg diagonal.
pub fn random_model(rng: &mut ChaCha8Rng, family: Family, k: usize) -> WeightModel {
    let n = family.stored_len(k);
    let mut params: Vec<f64> = normals(rng, n).into_iter().map(|x| 0.5 * x).collect();
    if family == Family::DiagonalNonneg {
        for p in &mut params {
            if p.abs() < 0.05 {
                *p += 0.1f64.copysign(*p);
            }
        }
    }
    WeightModel::from_params(family, k, params, 0.3).unwrap()
}

/// Central differences of the batch loss; `step` on every stored parameter.
pub fn finite_difference(model: &WeightModel, batch: &TripletBatch, step: f64) -> Vec<f64> {
    let mut probe = model.clone();
    (0..model.params().len())
        .map(|j| {
            let base = model.params()[j];
            probe.params_mut()[j] = base + step;
            let plus = probe.nll_and_gradient(batch).unwrap().0;
            probe.params_mut()[j] = base - step;
            let minus = probe.nll_and_gradient(batch).unwrap().0;
            probe.params_mut()[j] = base;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)`, 0 for two zero vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = inf(analytic).max(inf(numeric));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
