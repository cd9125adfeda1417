//! Synthetic ground truth: random embeddings, a known generating model, and
//! judgments sampled from it. Because the generator is known, the best
//! achievable accuracy on any set of triplets can be computed exactly.

use nalgebra::DMatrix;
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Choice, EmbeddingTable, TripletConstraint, TripletDataset};
use crate::error::{Error, Result};
use crate::model::{sigmoid, FactoredTriplets, Family, WeightModel};
use crate::pca::{fit_pca, PcaProjection};
use crate::rng::{derive_seed, stream_rng, uniform_at};

/// The model that generates synthetic judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub model: WeightModel,
    /// Maps raw embeddings into the space the model works in.
    pub pca: PcaProjection,
    /// Logits are divided by this before the logistic.
    pub temperature: f64,
}

/// Positions `(query, ref1, ref2)` of an unlabelled triplet in a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Skeleton {
    pub query: usize,
    pub ref1: usize,
    pub ref2: usize,
}

impl GroundTruth {
    pub fn new(model: WeightModel, pca: PcaProjection, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid(
                "temperature",
                format!("{temperature} is not positive"),
            ));
        }
        if pca.k() != model.k() {
            return Err(Error::Dimension {
                expected: model.k(),
                got: pca.k(),
            });
        }
        Ok(GroundTruth {
            model,
            pca,
            temperature,
        })
    }

    /// `P(choose ref1)` for each skeleton.
    pub fn probabilities(
        &self,
        table: &EmbeddingTable,
        skeletons: &[Skeleton],
    ) -> Result<Vec<f64>> {
        let projected = self.pca.project_table(table)?;
        let k = projected.dim();
        let mut a = Vec::with_capacity(skeletons.len() * k);
        let mut b = Vec::with_capacity(skeletons.len() * k);
        for s in skeletons {
            for i in [s.query, s.ref1, s.ref2] {
                if i >= table.len() {
                    return Err(Error::invalid(
                        "skeleton",
                        format!("row {i} is outside a table of {} rows", table.len()),
                    ));
                }
            }
            a.extend_from_slice(projected.row(s.query));
            b.extend(
                projected
                    .row(s.ref1)
                    .iter()
                    .zip(projected.row(s.ref2))
                    .map(|(x, y)| x - y),
            );
        }
        let rows = FactoredTriplets { k, a, b };
        Ok(self
            .model
            .logits(&rows)
            .into_iter()
            .map(|z| sigmoid(z / self.temperature))
            .collect())
    }
}

/// `n` i.i.d. standard-normal vectors with ids `img_0000`, `img_0001`, ...
pub fn sample_embeddings(n: usize, d: usize, seed: u64) -> Result<EmbeddingTable> {
    if n < 3 {
        return Err(Error::invalid(
            "n",
            format!("need at least 3 items, got {n}"),
        ));
    }
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let width = (n - 1).to_string().len().max(4);
    let ids = (0..n).map(|i| format!("img_{i:0width$}")).collect();
    let mut rng = stream_rng(seed, 0);
    let data = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    EmbeddingTable::new(ids, d, data)
}

/// `count` triplets of three distinct rows, drawn uniformly.
pub fn sample_skeletons(n_items: usize, count: usize, seed: u64) -> Result<Vec<Skeleton>> {
    if n_items < 3 {
        return Err(Error::invalid(
            "n_items",
            format!("need at least 3 items, got {n_items}"),
        ));
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..count)
        .map(|_| {
            let s = index::sample(&mut rng, n_items, 3);
            Skeleton {
                query: s.index(0),
                ref1: s.index(1),
                ref2: s.index(2),
            }
        })
        .collect())
}

/// Labels each skeleton by a Bernoulli draw from the truth's choice probability.
///
/// Draw `i` uses a counter-based uniform keyed on `(seed, i)`, so labels do
/// not depend on evaluation order.
pub fn sample_judgments(
    truth: &GroundTruth,
    table: &EmbeddingTable,
    skeletons: &[Skeleton],
    seed: u64,
) -> Result<TripletDataset> {
    let probs = truth.probabilities(table, skeletons)?;
    let ids = table.ids();
    let constraints = skeletons
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(i, (s, p))| {
            let chosen = if uniform_at(seed, i as u64) < p {
                Choice::Ref1
            } else {
                Choice::Ref2
            };
            TripletConstraint::new(&*ids[s.query], &*ids[s.ref1], &*ids[s.ref2], chosen)
        })
        .collect::<Result<_>>()?;
    Ok(TripletDataset::new(constraints))
}

/// Expected accuracy of the generating model itself: mean of `max(p, 1 − p)`.
pub fn bayes_accuracy(
    truth: &GroundTruth,
    table: &EmbeddingTable,
    skeletons: &[Skeleton],
) -> Result<f64> {
    if skeletons.is_empty() {
        return Ok(0.0);
    }
    let probs = truth.probabilities(table, skeletons)?;
    Ok(probs.iter().map(|p| p.max(1.0 - p)).sum::<f64>() / probs.len() as f64)
}

/// Temperature at which [`bayes_accuracy`] equals `target`, by bisection in
/// log space. Bayes accuracy falls monotonically as temperature rises.
pub fn calibrate_temperature(
    truth: &GroundTruth,
    table: &EmbeddingTable,
    skeletons: &[Skeleton],
    target: f64,
) -> Result<f64> {
    let at = |t: f64| -> Result<f64> {
        let g = GroundTruth {
            temperature: t,
            ..truth.clone()
        };
        bayes_accuracy(&g, table, skeletons)
    };
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    if !(target > at(hi.exp())? && target < at(lo.exp())?) {
        return Err(Error::invalid(
            "target_bayes",
            format!("{target} is not reachable for these skeletons"),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

fn random_matrix(k: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, stream);
    DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    (0..k * k).map(|i| m[(i / k, i % k)]).collect()
}

/// Builds `W* = (1 − asymmetry)·S + asymmetry·A`, with `S` a random PSD
/// matrix and `A` a random antisymmetric matrix, both scaled to unit spectral
/// norm. Only the unconstrained family can carry `asymmetry > 0`.
///
/// The returned truth uses the identity projection and temperature 1; swap
/// either with [`GroundTruth::new`].
pub fn make_ground_truth(
    family: Family,
    k: usize,
    asymmetry: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&asymmetry) {
        return Err(Error::invalid(
            "asymmetry",
            format!("{asymmetry} is outside [0, 1]"),
        ));
    }
    if asymmetry > 0.0 && family != Family::Unconstrained {
        return Err(Error::Inexpressible { family, asymmetry });
    }

    // S = BᵀB / ‖BᵀB‖, so V = B / sqrt(‖BᵀB‖) satisfies VᵀV = S.
    let b = random_matrix(k, seed, 0);
    let btb = b.transpose() * &b;
    let s_norm = spectral_norm(&btb);
    let s = &btb / s_norm;

    let model = match family {
        Family::Identity => WeightModel::Identity { k },
        Family::DiagonalNonneg | Family::DiagonalSignedL2 => {
            let diag: Vec<f64> = (0..k).map(|i| s[(i, i)]).collect();
            let top = diag.iter().copied().fold(0.0, f64::max);
            let v = diag.iter().map(|x| x / top).collect();
            WeightModel::from_params(family, k, v, 0.0)?
        }
        Family::Symmetric => WeightModel::Symmetric {
            k,
            v: row_major(&(&b / s_norm.sqrt())),
        },
        Family::Unconstrained => {
            let w = if asymmetry > 0.0 && k > 1 {
                let c = random_matrix(k, seed, 1);
                let anti = &c - c.transpose();
                let a = &anti / spectral_norm(&anti);
                s * (1.0 - asymmetry) + a * asymmetry
            } else {
                s * (1.0 - asymmetry)
            };
            WeightModel::Unconstrained {
                k,
                w: row_major(&w),
            }
        }
    };
    GroundTruth::new(model, PcaProjection::identity(k), 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Fixed(f64),
    /// Pick the temperature that gives this Bayes accuracy on the sampled skeletons.
    TargetBayes(f64),
}

/// Everything needed for an end-to-end synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_images: usize,
    pub d: usize,
    pub k: usize,
    /// Rows in the separate corpus the projection is fit on.
    pub corpus_size: usize,
    pub family: Family,
    pub asymmetry: f64,
    pub temperature: Temperature,
    pub n_triplets: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_images: usize, d: usize, k: usize, n_triplets: usize, seed: u64) -> Self {
        SynthSpec {
            n_images,
            d,
            k,
            corpus_size: (8 * d).max(256),
            family: Family::Unconstrained,
            asymmetry: 0.0,
            temperature: Temperature::Fixed(1.0),
            n_triplets,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub corpus: EmbeddingTable,
    pub embeddings: EmbeddingTable,
    pub truth: GroundTruth,
    pub skeletons: Vec<Skeleton>,
    pub dataset: TripletDataset,
    pub bayes_accuracy: f64,
}

/// Generates corpus, judgment embeddings, a ground truth working in the
/// corpus's top-`k` principal subspace, and sampled judgments.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    let corpus = sample_embeddings(spec.corpus_size, spec.d, derive_seed(spec.seed, &[1]))?;
    let embeddings = sample_embeddings(spec.n_images, spec.d, derive_seed(spec.seed, &[2]))?;
    let pca = fit_pca(&corpus, spec.k)?;
    let base = make_ground_truth(
        spec.family,
        spec.k,
        spec.asymmetry,
        derive_seed(spec.seed, &[3]),
    )?;
    let skeletons = sample_skeletons(spec.n_images, spec.n_triplets, derive_seed(spec.seed, &[4]))?;

    let mut truth = GroundTruth::new(base.model, pca, 1.0)?;
    truth.temperature = match spec.temperature {
        Temperature::Fixed(t) => t,
        Temperature::TargetBayes(target) => {
            calibrate_temperature(&truth, &embeddings, &skeletons, target)?
        }
    };
    let truth = GroundTruth::new(truth.model, truth.pca, truth.temperature)?;
    let dataset = sample_judgments(
        &truth,
        &embeddings,
        &skeletons,
        derive_seed(spec.seed, &[5]),
    )?;
    let bayes_accuracy = bayes_accuracy(&truth, &embeddings, &skeletons)?;
    Ok(SynthData {
        corpus,
        embeddings,
        truth,
        skeletons,
        dataset,
        bayes_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_are_seeded_and_named() {
        let a = sample_embeddings(5, 3, 7).unwrap();
        assert_eq!(a, sample_embeddings(5, 3, 7).unwrap());
        assert_ne!(a, sample_embeddings(5, 3, 8).unwrap());
        assert_eq!(a.ids()[0], "img_0000");
        assert_eq!(a.ids()[4], "img_0004");
        assert_eq!(
            sample_embeddings(12_345, 1, 0).unwrap().ids()[7],
            "img_00007"
        );
        assert!(sample_embeddings(2, 3, 0).is_err());
    }

    #[test]
    fn embedding_coordinates_are_centered() {
        let t = sample_embeddings(10_000, 3, 1).unwrap();
        for j in 0..3 {
            let mean = t.rows().map(|r| r[j]).sum::<f64>() / 1e4;
            assert!(mean.abs() < 0.05, "coordinate {j} mean {mean}");
        }
    }

    fn saturated() -> (GroundTruth, EmbeddingTable, Vec<Skeleton>) {
        // orthonormal rows: q = e0 = r1, r2 = e1, so the identity logit is 1;
        // temperature 1/50 lifts it to 50.
        let table = EmbeddingTable::new(
            ["q", "r", "s"].map(String::from).to_vec(),
            2,
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let truth = GroundTruth::new(
            WeightModel::Identity { k: 2 },
            PcaProjection::identity(2),
            1.0 / 50.0,
        )
        .unwrap();
        let sk = vec![
            Skeleton {
                query: 0,
                ref1: 1,
                ref2: 2
            };
            1000
        ];
        (truth, table, sk)
    }

    #[test]
    fn saturated_logit_always_picks_ref1() {
        let (truth, table, sk) = saturated();
        let ds = sample_judgments(&truth, &table, &sk, 3).unwrap();
        assert!(ds.constraints.iter().all(|c| c.chosen == Choice::Ref1));
        assert_eq!(bayes_accuracy(&truth, &table, &sk).unwrap(), 1.0);
    }

    #[test]
    fn zero_logit_is_a_fair_coin() {
        let table = EmbeddingTable::new(
            ["q", "r", "s"].map(String::from).to_vec(),
            2,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let truth = GroundTruth::new(
            WeightModel::Identity { k: 2 },
            PcaProjection::identity(2),
            1.0,
        )
        .unwrap();
        let sk = vec![
            Skeleton {
                query: 0,
                ref1: 1,
                ref2: 2
            };
            10_000
        ];
        let ds = sample_judgments(&truth, &table, &sk, 5).unwrap();
        let p = ds
            .constraints
            .iter()
            .filter(|c| c.chosen == Choice::Ref1)
            .count() as f64
            / 1e4;
        assert!((p - 0.5).abs() < 3.0 * 0.005, "{p}");
        assert_eq!(ds, sample_judgments(&truth, &table, &sk, 5).unwrap());
        assert_eq!(bayes_accuracy(&truth, &table, &sk).unwrap(), 0.5);
    }

    #[test]
    fn bayes_accuracy_of_unit_logit() {
        let table = EmbeddingTable::new(
            ["q", "r", "s"].map(String::from).to_vec(),
            2,
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let truth = GroundTruth::new(
            WeightModel::Identity { k: 2 },
            PcaProjection::identity(2),
            1.0,
        )
        .unwrap();
        let sk = [Skeleton {
            query: 0,
            ref1: 2,
            ref2: 1,
        }];
        let b = bayes_accuracy(&truth, &table, &sk).unwrap();
        assert!((b - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_symmetry_knob() {
        let sym = make_ground_truth(Family::Unconstrained, 4, 0.0, 9).unwrap();
        let w = sym.model.effective_weights();
        for i in 0..4 {
            for j in 0..4 {
                assert!((w[i * 4 + j] - w[j * 4 + i]).abs() < 1e-12);
            }
        }
        let anti = make_ground_truth(Family::Unconstrained, 4, 1.0, 9).unwrap();
        let w = anti.model.effective_weights();
        for i in 0..4 {
            for j in 0..4 {
                assert!((w[i * 4 + j] + w[j * 4 + i]).abs() < 1e-12);
            }
        }
        let half = make_ground_truth(Family::Unconstrained, 4, 0.5, 9).unwrap();
        assert_eq!(
            half,
            make_ground_truth(Family::Unconstrained, 4, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn inexpressible_truths_are_rejected() {
        assert!(matches!(
            make_ground_truth(Family::DiagonalNonneg, 4, 0.3, 0),
            Err(Error::Inexpressible { .. })
        ));
        assert!(make_ground_truth(Family::Symmetric, 4, 0.3, 0).is_err());
        assert!(make_ground_truth(Family::Unconstrained, 4, 1.5, 0).is_err());
    }

    #[test]
    fn symmetric_truth_matches_its_psd_matrix() {
        let s = make_ground_truth(Family::Symmetric, 5, 0.0, 4).unwrap();
        let u = make_ground_truth(Family::Unconstrained, 5, 0.0, 4).unwrap();
        for (a, b) in s
            .model
            .effective_weights()
            .iter()
            .zip(u.model.effective_weights())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_hits_target() {
        let table = sample_embeddings(40, 4, 1).unwrap();
        let truth = make_ground_truth(Family::Unconstrained, 4, 0.3, 2).unwrap();
        let sk = sample_skeletons(40, 2000, 3).unwrap();
        let t = calibrate_temperature(&truth, &table, &sk, 0.88).unwrap();
        let g = GroundTruth::new(truth.model.clone(), truth.pca.clone(), t).unwrap();
        assert!((bayes_accuracy(&g, &table, &sk).unwrap() - 0.88).abs() < 1e-9);
        assert!(calibrate_temperature(&truth, &table, &sk, 0.4).is_err());
    }

    #[test]
    fn skeletons_use_distinct_items() {
        let sk = sample_skeletons(5, 500, 1).unwrap();
        assert!(sk
            .iter()
            .all(|s| s.query != s.ref1 && s.query != s.ref2 && s.ref1 != s.ref2));
        assert_eq!(sk, sample_skeletons(5, 500, 1).unwrap());
    }
}
