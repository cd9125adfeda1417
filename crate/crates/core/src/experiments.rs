//! Cross-validation over held-out triplets or held-out images, and the
//! accuracy-vs-k sweep across weight families.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{EmbeddingTable, IndexedTriplet, TripletDataset};
use crate::error::{Error, Result};
use crate::io::{ReportRow, Split, SummaryRow};
use crate::model::{FactoredTriplets, Family, WeightModel};
use crate::pca::{fit_pca, PcaProjection};
use crate::rng::{derive_seed, stream_rng};
use crate::train::{epoch_accuracy, mean_log_likelihood, train, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FoldMode {
    HeldOutTriplets,
    HeldOutImages,
}

impl FoldMode {
    pub fn tag(self) -> &'static str {
        match self {
            FoldMode::HeldOutTriplets => "heldout_triplets",
            FoldMode::HeldOutImages => "heldout_images",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldSpec {
    pub mode: FoldMode,
    pub index: usize,
    /// Sorted constraint indices.
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    /// Held-out image ids, sorted; empty in triplet mode.
    pub held_out_images: Vec<String>,
}

/// Seeded permutation cut into `n_folds` parts whose sizes differ by at most one.
pub fn kfold_triplets(m: usize, n_folds: usize, seed: u64) -> Result<Vec<FoldSpec>> {
    if n_folds < 2 {
        return Err(Error::invalid(
            "n_folds",
            format!("need at least 2 folds, got {n_folds}"),
        ));
    }
    if m < n_folds {
        return Err(Error::invalid(
            "dataset",
            format!("{m} triplets cannot fill {n_folds} folds"),
        ));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut stream_rng(seed, 0));

    let (base, extra) = (m / n_folds, m % n_folds);
    let mut parts = Vec::with_capacity(n_folds);
    let mut start = 0;
    for f in 0..n_folds {
        let len = base + usize::from(f < extra);
        let mut part = perm[start..start + len].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += len;
    }

    Ok((0..n_folds)
        .map(|f| {
            let mut train: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            train.sort_unstable();
            FoldSpec {
                mode: FoldMode::HeldOutTriplets,
                index: f,
                train,
                validation: parts[f].clone(),
                held_out_images: Vec::new(),
            }
        })
        .collect())
}

/// Splits triplets by holding out images.
///
/// Each fold draws its own random order of the images that occur in the
/// data and holds them out one at a time until the triplets touching no
/// held-out image make up at most `target_train_fraction` of the total.
/// Every triplet touching a held-out image goes to validation. Folds are
/// independent draws, so held-out sets can overlap across folds.
pub fn kfold_images(
    triplets: &[IndexedTriplet],
    table: &EmbeddingTable,
    n_folds: usize,
    target_train_fraction: f64,
    seed: u64,
) -> Result<Vec<FoldSpec>> {
    if n_folds < 2 {
        return Err(Error::invalid(
            "n_folds",
            format!("need at least 2 folds, got {n_folds}"),
        ));
    }
    if !(target_train_fraction > 0.0 && target_train_fraction < 1.0) {
        return Err(Error::invalid(
            "target_train_fraction",
            format!("{target_train_fraction} is outside (0, 1)"),
        ));
    }
    if triplets.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let m = triplets.len();
    let mut touching: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in triplets.iter().enumerate() {
        for item in [t.query, t.ref1, t.ref2] {
            touching.entry(item).or_default().push(i);
        }
    }
    let images: Vec<usize> = touching.keys().copied().collect();

    (0..n_folds)
        .map(|f| {
            let mut order = images.clone();
            order.shuffle(&mut stream_rng(seed, f as u64));
            let mut removed = vec![false; m];
            let mut n_train = m;
            let mut held = Vec::new();
            for img in order {
                if n_train as f64 <= target_train_fraction * m as f64 {
                    break;
                }
                held.push(img);
                for &t in &touching[&img] {
                    if !removed[t] {
                        removed[t] = true;
                        n_train -= 1;
                    }
                }
            }
            let achieved = n_train as f64 / m as f64;
            if n_train == 0 {
                return Err(Error::ImageFold {
                    fold: f,
                    reason: "no training triplets survive",
                    achieved,
                });
            }
            if n_train == m {
                return Err(Error::ImageFold {
                    fold: f,
                    reason: "validation set is empty",
                    achieved,
                });
            }
            let (validation, train): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| removed[i]);
            let held_out_images: BTreeSet<String> =
                held.iter().map(|&i| table.ids()[i].clone()).collect();
            Ok(FoldSpec {
                mode: FoldMode::HeldOutImages,
                index: f,
                train,
                validation,
                held_out_images: held_out_images.into_iter().collect(),
            })
        })
        .collect()
}

/// Checks the held-out-image invariants by a full scan.
pub fn check_image_fold(
    fold: &FoldSpec,
    triplets: &[IndexedTriplet],
    table: &EmbeddingTable,
) -> Result<()> {
    let held: BTreeSet<usize> = fold
        .held_out_images
        .iter()
        .map(|id| {
            table
                .position(id)
                .ok_or_else(|| Error::UnknownId(id.clone()))
        })
        .collect::<Result<_>>()?;
    let touches = |t: &IndexedTriplet| held.iter().any(|&h| t.touches(h));
    if let Some(&i) = fold.train.iter().find(|&&i| touches(&triplets[i])) {
        return Err(Error::invalid(
            "fold",
            format!("training triplet {i} touches a held-out image"),
        ));
    }
    if let Some(&i) = fold.validation.iter().find(|&&i| !touches(&triplets[i])) {
        return Err(Error::invalid(
            "fold",
            format!("validation triplet {i} touches no held-out image"),
        ));
    }
    if fold.validation.is_empty() {
        return Err(Error::invalid("fold", "validation set is empty"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ks: Vec<usize>,
    pub families: Vec<Family>,
    /// Per-family training configuration; `default_config` covers the rest.
    pub configs: BTreeMap<Family, TrainingConfig>,
    pub default_config: TrainingConfig,
    pub centered_projection: bool,
    pub seed: u64,
}

impl SweepSpec {
    pub fn config_for(&self, family: Family) -> &TrainingConfig {
        self.configs.get(&family).unwrap_or(&self.default_config)
    }

    fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::invalid(
                "ks",
                "need a nonempty list of positive k values",
            ));
        }
        if self.families.is_empty() {
            return Err(Error::invalid("families", "need at least one family"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
}

/// Mean log-likelihood of `dataset` under `model` (projected by `pca`).
pub fn dataset_log_likelihood(
    model: &WeightModel,
    pca: &PcaProjection,
    table: &EmbeddingTable,
    dataset: &TripletDataset,
) -> Result<f64> {
    let projected = pca.project_table(table)?;
    let rows = FactoredTriplets::from_indexed(&projected, &dataset.resolve(table)?);
    mean_log_likelihood(model, &rows)
}

/// Trains and evaluates every `(fold, family, k)` cell.
///
/// The projection is fit once on `corpus` at the largest requested `k` and
/// truncated per cell. Cells run on `jobs` threads; rows are sorted by
/// `(fold, family, k, split)` so the output does not depend on scheduling.
pub fn run_sweep(
    dataset: &TripletDataset,
    corpus: &EmbeddingTable,
    judgments: &EmbeddingTable,
    sweep: &SweepSpec,
    folds: &[FoldSpec],
    jobs: usize,
) -> Result<SweepReport> {
    sweep.validate()?;
    let triplets = dataset.resolve(judgments)?;
    let k_max = *sweep.ks.iter().max().expect("validated nonempty");
    let mut pca = fit_pca(corpus, k_max)?;
    pca.centered_projection = sweep.centered_projection;

    let projected: BTreeMap<usize, EmbeddingTable> = sweep
        .ks
        .iter()
        .map(|&k| Ok((k, pca.truncate(k)?.project_table(judgments)?)))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for fold in folds {
        for &family in &sweep.families {
            for &k in &sweep.ks {
                cells.push((fold, family, k));
            }
        }
    }

    let run = |&(fold, family, k): &(&FoldSpec, Family, usize)| -> Result<Vec<ReportRow>> {
        let annotate = |e: Error| Error::Run {
            fold: fold.index,
            family,
            k,
            source: Box::new(e),
        };
        let table = &projected[&k];
        let pick =
            |idx: &[usize]| -> Vec<IndexedTriplet> { idx.iter().map(|&i| triplets[i]).collect() };
        let train_rows = FactoredTriplets::from_indexed(table, &pick(&fold.train));
        let val_rows = FactoredTriplets::from_indexed(table, &pick(&fold.validation));

        let mut config = sweep.config_for(family).clone();
        config.seed = derive_seed(sweep.seed, &[fold.index as u64]);
        let init = WeightModel::init(family, k, config.lambda);
        let (model, history) = train(init, &train_rows, &config).map_err(annotate)?;

        let mut rows = Vec::with_capacity(2);
        for (split, data) in [(Split::Train, &train_rows), (Split::Validation, &val_rows)] {
            rows.push(ReportRow {
                fold: fold.index,
                family,
                k,
                split,
                accuracy: epoch_accuracy(&model, data).map_err(annotate)?,
                mean_ll: mean_log_likelihood(&model, data).map_err(annotate)?,
                epochs: history.epochs_run(),
            });
        }
        Ok(rows)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let results: Vec<Result<Vec<ReportRow>>> = pool.install(|| cells.par_iter().map(run).collect());

    let mut rows = Vec::with_capacity(cells.len() * 2);
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by_key(|r| (r.fold, r.family, r.k, r.split));
    let summary = summarize(&rows);
    Ok(SweepReport { rows, summary })
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

/// Mean and standard error across folds per `(family, k, split)`.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Family, usize, Split), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.family, r.k, r.split)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((family, k, split), g)| {
            let acc: Vec<f64> = g.iter().map(|r| r.accuracy).collect();
            let ll: Vec<f64> = g.iter().map(|r| r.mean_ll).collect();
            let (mean_accuracy, sem_accuracy) = mean_sem(&acc);
            let (mean_ll, sem_ll) = mean_sem(&ll);
            SummaryRow {
                family,
                k,
                split,
                folds: g.len(),
                mean_accuracy,
                sem_accuracy,
                mean_ll,
                sem_ll,
                mean_epochs: g.iter().map(|r| r.epochs as f64).sum::<f64>() / g.len() as f64,
            }
        })
        .collect()
}

/// `10^lo, 10^(lo+1), ..., 10^hi`.
pub fn lambda_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

/// Cross-validated validation accuracy of the signed-diagonal baseline at
/// one penalty strength and one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaScore {
    pub lambda: f64,
    pub k: usize,
    pub mean_accuracy: f64,
    pub sem_accuracy: f64,
}

/// Runs the `diagonal_signed_l2` family over every `lambda` in `grid`, using
/// `template` for k values, optimizer settings and seed (its family list is
/// ignored). Pick the penalty from the returned scores; no default exists.
pub fn sweep_lambda(
    dataset: &TripletDataset,
    corpus: &EmbeddingTable,
    judgments: &EmbeddingTable,
    template: &SweepSpec,
    grid: &[f64],
    folds: &[FoldSpec],
    jobs: usize,
) -> Result<Vec<LambdaScore>> {
    let family = Family::DiagonalSignedL2;
    let mut scores = Vec::new();
    for &lambda in grid {
        let mut config = template.config_for(family).clone();
        config.lambda = lambda;
        let sweep = SweepSpec {
            families: vec![family],
            configs: BTreeMap::new(),
            default_config: config,
            ..template.clone()
        };
        let report = run_sweep(dataset, corpus, judgments, &sweep, folds, jobs)?;
        scores.extend(
            report
                .summary
                .iter()
                .filter(|r| r.split == Split::Validation)
                .map(|r| LambdaScore {
                    lambda,
                    k: r.k,
                    mean_accuracy: r.mean_accuracy,
                    sem_accuracy: r.sem_accuracy,
                }),
        );
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Choice;

    #[test]
    fn ten_triplets_five_folds() {
        let folds = kfold_triplets(10, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.validation.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.validation.len(), 2);
            assert_eq!(f.train.len(), 8);
            assert!(f.train.iter().all(|i| !f.validation.contains(i)));
        }
        assert_eq!(folds, kfold_triplets(10, 5, 3).unwrap());
    }

    #[test]
    fn full_scale_fold_sizes() {
        let folds = kfold_triplets(112_784, 5, 0).unwrap();
        for f in &folds {
            assert!(f.validation.len() == 22_556 || f.validation.len() == 22_557);
        }
    }

    #[test]
    fn fold_count_errors() {
        assert!(kfold_triplets(10, 1, 0).is_err());
        assert!(kfold_triplets(3, 5, 0).is_err());
    }

    fn toy() -> (EmbeddingTable, Vec<IndexedTriplet>) {
        // images A..F, 8 triplets; A appears in triplets 0, 1, 5
        let ids: Vec<String> = ["A", "B", "C", "D", "E", "F"].map(String::from).to_vec();
        let table = EmbeddingTable::new(ids, 1, vec![0.0; 6]).unwrap();
        let t = |q, r1, r2| IndexedTriplet {
            query: q,
            ref1: r1,
            ref2: r2,
            chosen: Choice::Ref1,
        };
        let triplets = vec![
            t(0, 1, 2),
            t(3, 0, 4),
            t(1, 2, 3),
            t(2, 4, 5),
            t(5, 3, 1),
            t(4, 5, 0),
            t(3, 2, 1),
            t(1, 4, 5),
        ];
        (table, triplets)
    }

    #[test]
    fn holding_out_a_moves_exactly_its_triplets() {
        let (table, triplets) = toy();
        // train fraction 5/8 after removing A; target set between 5/8 and 1
        // will stop as soon as it is reached. Scan every seed until A is drawn first.
        for seed in 0..200 {
            let folds = kfold_images(&triplets, &table, 2, 0.7, seed).unwrap();
            for f in folds {
                check_image_fold(&f, &triplets, &table).unwrap();
                if f.held_out_images == ["A"] {
                    assert_eq!(f.validation, vec![0, 1, 5]);
                    assert_eq!(f.train, vec![2, 3, 4, 6, 7]);
                    return;
                }
            }
        }
        panic!("no fold held out A alone");
    }

    #[test]
    fn image_folds_stop_at_target() {
        let (table, triplets) = toy();
        let folds = kfold_images(&triplets, &table, 5, 0.8, 1).unwrap();
        for f in &folds {
            check_image_fold(f, &triplets, &table).unwrap();
            assert!(f.train.len() as f64 <= 0.8 * 8.0);
            assert!(!f.train.is_empty());
        }
    }

    #[test]
    fn degenerate_connectivity_is_an_error() {
        // every triplet shares image 0; holding it out empties training
        let ids: Vec<String> = (0..5).map(|i| format!("i{i}")).collect();
        let table = EmbeddingTable::new(ids, 1, vec![0.0; 5]).unwrap();
        let triplets: Vec<IndexedTriplet> = (1..4)
            .map(|r| IndexedTriplet {
                query: 0,
                ref1: r,
                ref2: r + 1,
                chosen: Choice::Ref1,
            })
            .collect();
        let err = (0..50)
            .find_map(|seed| kfold_images(&triplets, &table, 2, 0.5, seed).err())
            .expect("some draw must hold out the hub");
        assert!(matches!(err, Error::ImageFold { .. }));
    }

    #[test]
    fn empty_held_out_set_fails_the_check() {
        let (table, triplets) = toy();
        let fold = FoldSpec {
            mode: FoldMode::HeldOutImages,
            index: 0,
            train: (0..8).collect(),
            validation: vec![],
            held_out_images: vec![],
        };
        assert!(check_image_fold(&fold, &triplets, &table).is_err());
    }

    #[test]
    fn sem_uses_sample_deviation() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sd = sqrt(5/3), sem = sd / 2
        assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_sweep_scores_every_grid_point() {
        let mut spec = crate::synth::SynthSpec::new(16, 4, 2, 300, 5);
        spec.temperature = crate::synth::Temperature::Fixed(1.0);
        let data = crate::synth::generate(&spec).unwrap();
        let template = SweepSpec {
            ks: vec![1, 2],
            families: vec![],
            configs: BTreeMap::new(),
            default_config: TrainingConfig {
                learning_rate: 1e-3,
                max_epochs: 25,
                ..Default::default()
            },
            centered_projection: false,
            seed: 1,
        };
        let grid = lambda_grid(-2, 1);
        assert_eq!(grid, vec![0.01, 0.1, 1.0, 10.0]);
        let folds = kfold_triplets(data.dataset.len(), 3, 0).unwrap();
        let scores = sweep_lambda(
            &data.dataset,
            &data.corpus,
            &data.embeddings,
            &template,
            &grid,
            &folds,
            2,
        )
        .unwrap();
        assert_eq!(scores.len(), 8);
        assert!(scores
            .iter()
            .all(|s| (0.0..=1.0).contains(&s.mean_accuracy)));
        assert_eq!(scores[6].lambda, 10.0);
        assert_eq!(scores[6].k, 1);
    }
}
