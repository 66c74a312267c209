//! Runs the search for a few seeds and exports a retraining set sampled
//! from the union of their archives.
//!
//! cargo run --release --example export_dataset -- [max] [out_dir]

use std::path::PathBuf;

use segtest::campaign::{cmd_export, cmd_run, CampaignConfig};
use segtest::search::{SearchParams, Variant};
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let max: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = PathBuf::from(args.get(1).map(String::as_str).unwrap_or("export_dataset_out"));

    let mut config = CampaignConfig::new(Profile::Urban);
    config.image_size = 64;
    config.calibration_samples = 200;
    config.search = SearchParams { generations: 15, ..SearchParams::default() };
    let runs = out.join("runs");
    cmd_run(&config, Variant::Random, &[0, 1, 2], &runs)?;

    let s = cmd_export(&[runs], max, 0, &out.join("dataset"))?;
    println!("exported {} of {} archived images", s.exported, s.pool);
    let index = std::fs::read_to_string(out.join("dataset/index.csv")).map_err(|e| segtest::Error::io(&out, e))?;
    for line in index.lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
