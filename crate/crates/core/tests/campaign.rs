//! Campaign commands end to end: determinism, export, calibration and the CLI.

mod common;

use std::collections::HashSet;
use std::fs;
use std::process::Command;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segtest::backends::Ports;
use segtest::campaign::{cmd_export, cmd_run, CampaignConfig, ThresholdSource};
use segtest::features::{DistanceMetric, FeatureVector};
use segtest::fitness::{calibrate_t_diversity, sample_genomes, t_diversity_from_features, t_relevance_from_deltas, Thresholds};
use segtest::search::{SearchParams, Variant};
use segtest::Profile;

fn tiny(profile: Profile) -> CampaignConfig {
    let mut c = CampaignConfig::new(profile);
    c.image_size = 32;
    c.calibration_samples = 16;
    c.search = SearchParams {
        population_size: 4,
        generations: 3,
        initial_populations: 2,
        ..SearchParams::default()
    };
    c
}

#[test]
fn every_variant_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for variant in Variant::ALL {
        let mut config = tiny(Profile::Urban);
        config.workers = Some(3);
        cmd_run(&config, variant, &[5, 6], a.path()).unwrap();
        config.workers = Some(1);
        cmd_run(&config, variant, &[5, 6], b.path()).unwrap();
    }
    let (ta, tb) = (common::tree(a.path()), common::tree(b.path()));
    assert!(ta.iter().any(|(p, _)| p.starts_with("pix/seed-5/archive")));
    assert_eq!(ta.len(), tb.len());
    for (x, y) in ta.iter().zip(&tb) {
        assert_eq!(x.0, y.0);
        assert!(x.1 == y.1, "{} differs", x.0);
    }
}

#[test]
fn nogan_runs_record_no_realizer_calls() {
    let root = tempfile::tempdir().unwrap();
    let dirs = cmd_run(&tiny(Profile::Mars), Variant::Nogan, &[0], root.path()).unwrap();
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(dirs[0].join("run.json")).unwrap()).unwrap();
    assert_eq!(run["calls"]["realize"], 0);
    let manifest = fs::read_to_string(dirs[0].join("manifest.ndjson")).unwrap();
    let end: serde_json::Value = serde_json::from_str(manifest.lines().last().unwrap()).unwrap();
    assert_eq!(end["calls"]["realize"], 0);
}

#[test]
fn export_draws_900_unique_pairs_from_1200() {
    let root = tempfile::tempdir().unwrap();
    for r in 0..3u64 {
        common::synthetic_run(&root.path().join(format!("multi/seed-{r}")), r, r * 400..(r + 1) * 400);
    }
    let sources = [root.path().join("multi")];
    let (a, b, c) = (root.path().join("a"), root.path().join("b"), root.path().join("c"));
    let s = cmd_export(&sources, 900, 7, &a).unwrap();
    assert_eq!((s.pool, s.exported), (1200, 900));
    let index = fs::read_to_string(a.join("index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().skip(1).collect();
    assert_eq!(rows.len(), 900);
    let ids: HashSet<&str> = rows.iter().map(|r| r.split(',').nth(3).unwrap()).collect();
    assert_eq!(ids.len(), 900);
    assert_eq!(fs::read_dir(a.join("images")).unwrap().count(), 900);
    assert_eq!(fs::read_dir(a.join("masks")).unwrap().count(), 900);
    // each exported pair is the realistic image and ground truth of the member it names
    for row in rows.iter().take(20) {
        let f: Vec<&str> = row.split(',').collect();
        let n: usize = f[0].parse().unwrap();
        let src = std::path::Path::new(f[1]).join("archive");
        let k: usize = f[2].parse().unwrap();
        assert_eq!(fs::read(a.join(format!("images/{n:04}.png"))).unwrap(), fs::read(src.join(format!("{k:04}_realistic.png"))).unwrap());
        assert_eq!(fs::read(a.join(format!("masks/{n:04}.png"))).unwrap(), fs::read(src.join(format!("{k:04}_mask.png"))).unwrap());
    }

    cmd_export(&sources, 900, 7, &b).unwrap();
    assert_eq!(common::tree(&a), common::tree(&b));
    cmd_export(&sources, 900, 8, &c).unwrap();
    assert_ne!(fs::read(a.join("index.csv")).unwrap(), fs::read(c.join("index.csv")).unwrap());
    assert!(cmd_export(&sources, 900, 7, &a).is_err());

    let small = root.path().join("small");
    let s = cmd_export(&[root.path().join("multi/seed-0")], 900, 1, &small).unwrap();
    assert_eq!((s.pool, s.exported), (400, 400));
}

fn brute_median_pairwise(features: &[FeatureVector]) -> f64 {
    let mut d = Vec::new();
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            let s: f64 = features[i].values().iter().zip(features[j].values()).map(|(a, b)| (a - b) * (a - b)).sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / 2.0
    }
}

#[test]
fn t_diversity_is_the_median_pairwise_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let features: Vec<FeatureVector> = (0..10)
        .map(|_| FeatureVector::new((0..8).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap())
        .collect();
    assert_eq!(t_diversity_from_features(&features).unwrap(), brute_median_pairwise(&features));

    // the port-driven calibration sees exactly the same ten images
    let ports = Ports::builtin(Profile::Urban, 32);
    let features: Vec<FeatureVector> = sample_genomes(&ports, 10, 3)
        .iter()
        .map(|g| {
            let scene = ports.generate_scene(g).unwrap();
            ports.extract_features(&ports.realize(&scene).unwrap()).unwrap()
        })
        .collect();
    assert_eq!(
        calibrate_t_diversity(10, DistanceMetric::Feature, &ports, 3).unwrap(),
        brute_median_pairwise(&features)
    );
}

#[test]
fn t_relevance_is_the_nearest_rank_third_percentile() {
    let deltas: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    let mut shuffled = deltas.clone();
    shuffled.reverse();
    // ceil(0.03 * 100) = 3rd smallest value
    let mut sorted = shuffled.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(t_relevance_from_deltas(&shuffled).unwrap(), sorted[2]);
    assert_eq!(t_relevance_from_deltas(&[0.4; 7]).unwrap(), 0.4);
}

fn arb_config() -> impl Strategy<Value = CampaignConfig> {
    (
        prop_oneof![Just(Profile::Urban), Just(Profile::Mars)],
        1usize..20,
        0.0..1.0f64,
        prop::option::of(1usize..16),
        1u64..20,
        prop::option::of(0.0..50.0f64),
    )
        .prop_map(|(profile, half, pm, workers, reps, t)| {
            let mut c = CampaignConfig::new(profile);
            c.search.population_size = 2 * half;
            c.search.mutation_probability = pm;
            c.workers = workers;
            c.repetitions = reps;
            if let Some(t) = t {
                let rel = (profile == Profile::Urban).then_some(0.01);
                c.thresholds = ThresholdSource::Inline(Thresholds::new(profile, DistanceMetric::Feature, t, rel).unwrap());
            }
            c
        })
}

proptest! {
    #[test]
    fn config_parse_emit_parse_is_stable(c in arb_config()) {
        let once = CampaignConfig::from_json(&c.to_json().unwrap()).unwrap();
        let twice = CampaignConfig::from_json(&once.to_json().unwrap()).unwrap();
        prop_assert_eq!(&once, &c);
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn cli_runs_a_small_campaign_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(Profile::Mars);
    config.thresholds = ThresholdSource::File("t.txt".into());
    config.output_root = dir.path().join("campaign");
    let config_path = dir.path().join("c.json");
    fs::write(&config_path, config.to_json().unwrap()).unwrap();
    let bin = env!("CARGO_BIN_EXE_segtest");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let c = config_path.to_str().unwrap();

    let out = run(&["calibrate", "--config", c, "--samples", "12", "--out", dir.path().join("t.txt").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("t_relevance"));

    let out = run(&["run", "--config", c, "--variant", "multi", "--seeds", "0..2", "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
    let out = run(&["run", "--config", c, "--variant", "multi", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing to overwrite"));

    let campaign = dir.path().join("campaign");
    let report = dir.path().join("report");
    let out = run(&["report", campaign.to_str().unwrap(), "--out", report.to_str().unwrap(), "--pooling", "across-runs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.join("accuracy.csv").is_file());

    let export = dir.path().join("export");
    let out = run(&["export", campaign.to_str().unwrap(), "--max", "2", "--out", export.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert!(!run(&["run", "--profile", "mars", "--variant", "warp"]).status.success());
    assert!(!run(&["calibrate", "--out", "x.txt"]).status.success());
}
