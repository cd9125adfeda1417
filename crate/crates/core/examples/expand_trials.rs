//! Expand an 8-reference trial (2 picks) into its 12 triplet constraints.
//!
//! cargo run --example expand_trials

use tam::{expand_ranked_trial, Choice, RankedTrial};

fn main() -> tam::Result<()> {
    let refs = [
        "wren", "finch", "gull", "crow", "owl", "heron", "robin", "jay",
    ]
    .map(String::from);
    let trial = RankedTrial::new("sparrow".into(), refs, ["finch".into(), "robin".into()])?;

    let triplets = expand_ranked_trial(&trial);
    println!(
        "{} picked {:?}; {} constraints:",
        trial.query(),
        trial.chosen(),
        triplets.len()
    );
    for t in &triplets {
        let (more, less) = match t.chosen {
            Choice::Ref1 => (&t.ref1, &t.ref2),
            Choice::Ref2 => (&t.ref2, &t.ref1),
        };
        println!("  sim({}, {more}) > sim({}, {less})", t.query, t.query);
    }
    Ok(())
}
