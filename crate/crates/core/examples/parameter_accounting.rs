//! Free parameters per family, and the parameters-per-judgment ratio at a
//! training-set size of 90,000 triplets.
//!
//! cargo run --example parameter_accounting

use tam::{param_count, Family};

fn main() {
    let judgments = 90_000.0;
    print!("{:>20}", "k");
    for k in [8, 64, 512, 4096] {
        print!("{k:>14}");
    }
    println!();
    for family in Family::ALL {
        print!("{:>20}", family.tag());
        for k in [8, 64, 512, 4096] {
            print!("{:>14}", param_count(family, k));
        }
        println!(
            "   ({:.1}:1 at k=4096)",
            param_count(family, 4096) as f64 / judgments
        );
    }
}
