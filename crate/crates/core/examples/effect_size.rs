//! Compares two samples with the Mann-Whitney U test and the Vargha-Delaney
//! effect size, and prints the full pairwise table for three samples.
//!
//! cargo run --example effect_size

use segtest::stats::{compare_report, descriptive, mann_whitney_u, vargha_delaney_a12};
use segtest::Result;

fn main() -> Result<()> {
    let a = vec![0.12, 0.18, 0.20, 0.25, 0.31, 0.33, 0.40, 0.41, 0.45];
    let b = vec![0.30, 0.38, 0.44, 0.52, 0.55, 0.61, 0.64, 0.70];
    let c = vec![0.29, 0.35, 0.47, 0.50, 0.58, 0.66, 0.71, 0.73, 0.80, 0.81];

    let u = mann_whitney_u(&a, &b)?;
    let e = vargha_delaney_a12(&a, &b)?;
    println!("U = {}, p = {:.4e}", u.u, u.p_value);
    println!("A12 = {:.3} ({}, {:?})", e.a12, e.magnitude, e.direction);
    println!("a: {:?}", descriptive(&a)?);

    let sets = vec![("a".to_string(), a), ("b".to_string(), b), ("c".to_string(), c)];
    print!("{}", compare_report(&sets)?.to_csv());
    Ok(())
}
