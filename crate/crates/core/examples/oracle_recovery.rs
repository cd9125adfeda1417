//! Fit every family to judgments drawn from a known asymmetric similarity
//! and compare held-out accuracy with the generator's own accuracy.
//!
//! cargo run --release --example oracle_recovery -- [asymmetry]

use tam::experiments::kfold_triplets;
use tam::synth::{bayes_accuracy, generate, SynthSpec, Temperature};
use tam::{epoch_accuracy, train, FactoredTriplets, Family, TrainingConfig, WeightModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let asymmetry: f64 = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("0.4")
        .parse()?;
    let mut spec = SynthSpec::new(64, 32, 8, 50_000, 1);
    spec.asymmetry = asymmetry;
    spec.family = if asymmetry > 0.0 {
        Family::Unconstrained
    } else {
        Family::Symmetric
    };
    spec.temperature = Temperature::TargetBayes(0.88);
    let data = generate(&spec)?;

    let fold = &kfold_triplets(data.dataset.len(), 5, 0)?[0];
    let projected = data.truth.pca.project_table(&data.embeddings)?;
    let triplets = data.dataset.resolve(&data.embeddings)?;
    let rows = |idx: &[usize]| {
        let picked: Vec<_> = idx.iter().map(|&i| triplets[i]).collect();
        FactoredTriplets::from_indexed(&projected, &picked)
    };
    let (train_set, val_set) = (rows(&fold.train), rows(&fold.validation));
    let skeletons: Vec<_> = fold.validation.iter().map(|&i| data.skeletons[i]).collect();
    println!("temperature {:.4}", data.truth.temperature);
    println!(
        "validation ceiling {:.4}",
        bayes_accuracy(&data.truth, &data.embeddings, &skeletons)?
    );

    let config = TrainingConfig {
        learning_rate: 3e-4,
        lambda: 1e-3,
        seed: 3,
        ..TrainingConfig::default()
    };
    for family in Family::ALL {
        let (model, history) = train(WeightModel::init(family, spec.k, 0.0), &train_set, &config)?;
        println!(
            "{:>20}: train {:.4}  validation {:.4}  ({} epochs)",
            family.tag(),
            epoch_accuracy(&model, &train_set)?,
            epoch_accuracy(&model, &val_set)?,
            history.epochs_run()
        );
    }
    Ok(())
}
