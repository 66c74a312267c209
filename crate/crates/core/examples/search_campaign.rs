//! Runs a small campaign end to end through the same entry points as the
//! command line: calibrate, run two variants over two seeds, report.
//!
//! cargo run --release --example search_campaign -- [out_dir]

use std::path::PathBuf;

use segtest::campaign::{cmd_calibrate, cmd_report, cmd_run, CampaignConfig, ReportOptions, ThresholdSource};
use segtest::features::DistanceMetric;
use segtest::search::{SearchParams, Variant};
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "search_campaign_out".into()));
    let mut config = CampaignConfig::new(Profile::Urban);
    config.image_size = 64;
    config.search = SearchParams { generations: 20, ..SearchParams::default() };

    let thresholds_file = out.join("thresholds.txt");
    let t = cmd_calibrate(&config, Some(200), DistanceMetric::Feature, &thresholds_file)?;
    println!("t_diversity = {:.4}, t_relevance = {:?}", t.t_diversity, t.t_relevance);
    config.thresholds = ThresholdSource::File(thresholds_file);

    let runs = out.join("runs");
    for variant in [Variant::Multi, Variant::Random] {
        for dir in cmd_run(&config, variant, &[0, 1], &runs)? {
            println!("{}", dir.display());
        }
    }
    let report = cmd_report(&[runs], &out.join("report"), ReportOptions::default())?;
    for (variant, s) in &report.techniques {
        println!("{variant:>6}: {} runs, {} archived images", s.runs, s.accuracy.len());
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}
