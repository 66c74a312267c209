//! Samples random poses and summarizes how the built-in predictor fares on
//! them: relevance rate, gate reasons and the accuracy distribution.
//!
//! cargo run --example landscape -- [urban|mars] [samples] [seed]

use std::collections::BTreeMap;

use segtest::backends::Ports;
use segtest::features::DistanceMetric;
use segtest::fitness::{assess, calibrate, sample_genomes, EvaluationBundle, GateConfig};
use segtest::raster::DEFAULT_SIZE;
use segtest::stats::descriptive;
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let profile: Profile = args.first().map(|s| s.parse()).transpose()?.unwrap_or(Profile::Urban);
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let ports = Ports::builtin(profile, DEFAULT_SIZE);
    let gates = GateConfig::for_profile(profile);
    let thresholds = calibrate(n.min(200), DistanceMetric::Feature, &ports, &gates, seed)?;
    println!("thresholds: {}", thresholds.to_text().replace('\n', "  "));

    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    let mut scores = Vec::new();
    let mut deltas = Vec::new();
    for genome in sample_genomes(&ports, n, seed.wrapping_add(1)) {
        let scene = ports.generate_scene(&genome)?;
        let realistic = ports.realize(&scene)?;
        let prediction = ports.predict(&realistic)?;
        let prediction_simulated = ports.predict(&scene.simulated)?;
        let a = assess(
            &EvaluationBundle {
                scene: &scene,
                realistic: &realistic,
                prediction: &prediction,
                prediction_simulated: gates.use_delta_gate.then_some(&prediction_simulated),
            },
            &gates,
            &thresholds,
        )?;
        *reasons.entry(format!("{:?}", a.gate)).or_default() += 1;
        deltas.extend(a.delta);
        if a.gate.is_none() {
            scores.push(a.f_accuracy);
        }
    }
    println!("gates: {reasons:?}");
    if !scores.is_empty() {
        let low = scores.iter().filter(|s| **s < 0.2).count();
        println!("relevant: {} of {n}; score < 0.2: {low} ({:.1}%)", scores.len(), 100.0 * low as f64 / n as f64);
        println!("scores: {}", descriptive(&scores)?.to_csv_fields());
    }
    if !deltas.is_empty() {
        println!("deltas: {}", descriptive(&deltas)?.to_csv_fields());
    }
    Ok(())
}
