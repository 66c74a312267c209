//! Calibrates the diversity and relevance thresholds from uniformly sampled
//! poses and prints them in the thresholds file format.
//!
//! cargo run --release --example calibrate_thresholds -- [samples] [feature|pixel]

use segtest::backends::Ports;
use segtest::features::DistanceMetric;
use segtest::fitness::{calibrate, GateConfig};
use segtest::raster::DEFAULT_SIZE;
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let samples: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(300);
    let metric: DistanceMetric = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(DistanceMetric::Feature);

    for profile in [Profile::Urban, Profile::Mars] {
        let ports = Ports::builtin(profile, DEFAULT_SIZE);
        let gates = GateConfig::for_profile(profile);
        let t = calibrate(samples, metric, &ports, &gates, 0)?;
        println!("# {profile}, {samples} samples");
        print!("{}", t.to_text());
    }
    Ok(())
}
