//! Runs the multi-objective search, its single-objective variant and the
//! random baseline over several seeds, then compares the accuracy of what
//! each one kept and how spread out it is in feature space.
//!
//! cargo run --release --example compare_variants -- [seeds] [generations]

use segtest::backends::Ports;
use segtest::features::{pairwise_feature_distances, DistanceMetric, FeatureVector};
use segtest::fitness::{calibrate, GateConfig};
use segtest::raster::DEFAULT_SIZE;
use segtest::search::{run_variant, SearchParams, SearchSetup, Variant};
use segtest::stats::{mann_whitney_u, median, vargha_delaney_a12};
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let generations: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);

    let ports = Ports::builtin(Profile::Urban, DEFAULT_SIZE);
    let gates = GateConfig::for_profile(Profile::Urban);
    let thresholds = calibrate(200, DistanceMetric::Feature, &ports, &gates, 99)?;
    let params = SearchParams { generations, ..SearchParams::default() };

    let variants = [Variant::Multi, Variant::Single, Variant::Random];
    let mut accuracy: Vec<Vec<f64>> = vec![Vec::new(); variants.len()];
    let mut diversity_wins = 0;
    for seed in 0..seeds {
        let setup = SearchSetup { ports: &ports, gates, thresholds, params, seed };
        let mut spread = Vec::new();
        for (k, v) in variants.iter().enumerate() {
            let run = run_variant(&setup, *v, std::io::sink())?;
            accuracy[k].extend(run.members.iter().map(|m| m.fitness.f_accuracy));
            let features: Vec<FeatureVector> = run.members.iter().map(|m| (*m.feature).clone()).collect();
            let d = pairwise_feature_distances(&features)?;
            spread.push(if d.is_empty() { 0.0 } else { median(&d)? });
            println!("seed {seed} {v:>6}: {:4} kept, median pairwise distance {:.3}", run.members.len(), spread[k]);
        }
        if spread[0] > spread[1] {
            diversity_wins += 1;
        }
    }
    for k in 1..variants.len() {
        let a = vargha_delaney_a12(&accuracy[0], &accuracy[k])?;
        let u = mann_whitney_u(&accuracy[0], &accuracy[k])?;
        println!(
            "accuracy multi vs {}: A12 = {:.3} ({}), p = {:.4e}",
            variants[k], a.a12, a.magnitude, u.p_value
        );
    }
    println!("multi more diverse than single on {diversity_wins} of {seeds} seeds");
    Ok(())
}
