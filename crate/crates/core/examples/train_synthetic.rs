//! Train one family on synthetic judgments and print the per-epoch history.
//!
//! cargo run --release --example train_synthetic -- [family] [learning-rate]

use tam::synth::{generate, SynthSpec, Temperature};
use tam::{epoch_accuracy, train, FactoredTriplets, Family, TrainingConfig, WeightModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("symmetric").parse()?;
    let lr: f64 = args.next().as_deref().unwrap_or("3e-4").parse()?;

    let mut spec = SynthSpec::new(48, 16, 6, 20_000, 7);
    spec.asymmetry = 0.3;
    spec.temperature = Temperature::TargetBayes(0.9);
    let data = generate(&spec)?;
    let projected = data.truth.pca.project_table(&data.embeddings)?;
    let rows = FactoredTriplets::from_indexed(&projected, &data.dataset.resolve(&data.embeddings)?);

    let config = TrainingConfig {
        learning_rate: lr,
        lambda: 1e-3,
        seed: 1,
        ..TrainingConfig::default()
    };
    let (model, history) = train(WeightModel::init(family, spec.k, 0.0), &rows, &config)?;
    history.write_csv(std::io::stdout().lock())?;
    eprintln!(
        "{family}: {} epochs ({}), training accuracy {:.4}, ceiling {:.4}",
        history.epochs_run(),
        history.stop_reason.tag(),
        epoch_accuracy(&model, &rows)?,
        data.bayes_accuracy
    );
    Ok(())
}
