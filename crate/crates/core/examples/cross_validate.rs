//! Accuracy-vs-k sweep under five-fold cross-validation, both over held-out
//! triplets and over held-out images.
//!
//! cargo run --release --example cross_validate

use tam::experiments::{kfold_images, kfold_triplets, run_sweep, SweepSpec};
use tam::synth::{generate, SynthSpec, Temperature};
use tam::{Family, TrainingConfig};

fn main() -> tam::Result<()> {
    let mut spec = SynthSpec::new(40, 24, 8, 8_000, 3);
    spec.asymmetry = 0.4;
    spec.temperature = Temperature::TargetBayes(0.88);
    let data = generate(&spec)?;

    let sweep = SweepSpec {
        ks: vec![2, 4, 8],
        families: vec![
            Family::Identity,
            Family::DiagonalNonneg,
            Family::Symmetric,
            Family::Unconstrained,
        ],
        configs: Default::default(),
        default_config: TrainingConfig {
            learning_rate: 1e-3,
            ..TrainingConfig::default()
        },
        centered_projection: false,
        seed: 0,
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    let by_triplet = kfold_triplets(data.dataset.len(), 5, 0)?;
    let resolved = data.dataset.resolve(&data.embeddings)?;
    let by_image = kfold_images(&resolved, &data.embeddings, 5, 0.8, 0)?;

    for (name, folds) in [
        ("held-out triplets", by_triplet),
        ("held-out images", by_image),
    ] {
        let report = run_sweep(
            &data.dataset,
            &data.corpus,
            &data.embeddings,
            &sweep,
            &folds,
            jobs,
        )?;
        println!("{name} (best possible {:.3})", data.bayes_accuracy);
        println!("{}", tam::io::SummaryRow::HEADER);
        for row in report
            .summary
            .iter()
            .filter(|r| r.split == tam::io::Split::Validation)
        {
            println!("{}", row.to_csv_line());
        }
        println!();
    }
    Ok(())
}
