//! Fit a projection on a corpus, then project separate judgment embeddings.
//!
//! cargo run --example pca_projection

use tam::fit_pca;
use tam::synth::sample_embeddings;

fn main() -> tam::Result<()> {
    let corpus = sample_embeddings(500, 16, 1)?;
    let judged = sample_embeddings(10, 16, 2)?;

    let pca = fit_pca(&corpus, 8)?;
    let total: f64 = pca.variances().iter().sum();
    println!("retained variance by component:");
    let mut running = 0.0;
    for (i, v) in pca.variances().iter().enumerate() {
        running += v;
        println!(
            "  pc{i}: {v:.4} (cumulative {:.1}%)",
            100.0 * running / total
        );
    }
    println!("orthonormality error {:.2e}", pca.orthonormality_error());

    // Truncation keeps the leading components, so one fit serves every k.
    let small = pca.truncate(3)?;
    let raw = judged.row(0);
    println!("k=8 projection: {:.3?}", pca.project(raw)?);
    println!("k=3 projection: {:.3?}", small.project(raw)?);

    let mut centered = small.clone();
    centered.centered_projection = true;
    println!("k=3 centered:   {:.3?}", centered.project(raw)?);
    Ok(())
}
