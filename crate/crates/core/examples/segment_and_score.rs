//! Segments random poses with the built-in predictor and scores each one
//! the way the search does: per-class IoU, mean IoU and the gated accuracy
//! objective.
//!
//! cargo run --example segment_and_score -- [count]

use segtest::backends::Ports;
use segtest::fitness::{assess, sample_genomes, EvaluationBundle, GateConfig, Thresholds};
use segtest::features::DistanceMetric;
use segtest::metrics::{iou_class, mean_iou};
use segtest::raster::DEFAULT_SIZE;
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let profile = Profile::Urban;
    let ports = Ports::builtin(profile, DEFAULT_SIZE);
    let gates = GateConfig::for_profile(profile);
    // t_diversity plays no part in f_accuracy; only t_relevance does
    let thresholds = Thresholds::new(profile, DistanceMetric::Feature, 1.0, Some(0.05))?;
    let classes = profile.class_ids();

    println!("{:>3} {:>8} {:>8} {:>8} {:>8}  gate", "#", "iou", "miou", "delta", "f_acc");
    for (k, genome) in sample_genomes(&ports, count, 7).iter().enumerate() {
        let scene = ports.generate_scene(genome)?;
        let realistic = ports.realize(&scene)?;
        let prediction = ports.predict(&realistic)?;
        let prediction_simulated = ports.predict(&scene.simulated)?;
        let bundle = EvaluationBundle {
            scene: &scene,
            realistic: &realistic,
            prediction: &prediction,
            prediction_simulated: Some(&prediction_simulated),
        };
        let a = assess(&bundle, &gates, &thresholds)?;
        let iou = iou_class(&prediction, &scene.ground_truth, gates.class_of_interest)?.value;
        let miou = mean_iou(&prediction, &scene.ground_truth, &classes)?.value;
        println!(
            "{k:>3} {iou:8.3} {miou:8.3} {:8.3} {:8.3}  {}",
            a.delta.unwrap_or(f64::NAN),
            a.f_accuracy,
            a.gate.map(|g| format!("{g:?}")).unwrap_or_default()
        );
    }
    Ok(())
}
