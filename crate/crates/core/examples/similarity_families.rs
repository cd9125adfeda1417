//! The five weight families side by side on the same pair of vectors.
//!
//! cargo run --example similarity_families

use tam::{Family, WeightModel};

fn show(model: &WeightModel, a: &[f64], b: &[f64]) -> tam::Result<()> {
    let k = model.k();
    let w = model.effective_weights();
    println!(
        "{} ({} free parameters)",
        model.family(),
        model.family().param_count(k)
    );
    for row in w.chunks(k) {
        println!("  {row:6.2?}");
    }
    println!(
        "  s(a,b) = {:.3}   s(b,a) = {:.3}   P(choose a | q=b, a, -a) = {:.3}",
        model.similarity(a, b)?,
        model.similarity(b, a)?,
        model.choice_probability(b, a, &[-a[0], -a[1]])?
    );
    Ok(())
}

fn main() -> tam::Result<()> {
    let (a, b) = ([1.0, 0.5], [0.2, 1.0]);
    let models = [
        WeightModel::init(Family::Identity, 2, 0.0),
        WeightModel::from_params(Family::DiagonalNonneg, 2, vec![2.0, -0.5], 0.0)?,
        WeightModel::from_params(Family::DiagonalSignedL2, 2, vec![2.0, -0.5], 0.01)?,
        WeightModel::from_params(Family::Symmetric, 2, vec![1.0, 1.0, 0.0, 1.0], 0.0)?,
        WeightModel::from_params(Family::Unconstrained, 2, vec![1.0, 1.5, -0.5, 1.0], 0.0)?,
    ];
    for m in &models {
        show(m, &a, &b)?;
    }
    Ok(())
}
