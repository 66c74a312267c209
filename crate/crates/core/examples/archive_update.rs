//! Walks a handful of candidates through the archive update rule on a
//! one-dimensional feature line and prints what happens to each.
//!
//! cargo run --example archive_update

use segtest::features::{DistanceMetric, FeatureVector};
use segtest::search::{Archive, ArchivePolicy, FeaturePoint};
use segtest::Result;

fn main() -> Result<()> {
    let mut archive = Archive::new(DistanceMetric::Feature, 1.0, ArchivePolicy::Diverse);
    let candidates = [
        (0.60, 0.0),
        (0.50, 3.0),
        (0.40, 0.5), // close to the first and more accurate: replaces it
        (0.70, 3.4), // close to the second but worse: rejected
        (2.00, 9.0), // penalized: ignored
        (0.30, 6.0),
        (0.20, 5.6), // close to the third and more accurate: takes its slot
    ];
    for (k, (f_accuracy, x)) in candidates.into_iter().enumerate() {
        let point = FeaturePoint {
            id: k as u64 + 1,
            f_accuracy,
            feature: FeatureVector::new(vec![x])?,
        };
        let event = archive.update(point)?;
        let state: Vec<String> = archive
            .members()
            .iter()
            .map(|m| format!("#{}@{}({})", m.id, m.feature.values()[0], m.f_accuracy))
            .collect();
        println!("#{} x={x:<4} f_acc={f_accuracy:<4} -> {event:?}\n    [{}]", k + 1, state.join(", "));
    }
    Ok(())
}
