//! Campaign commands: calibrate thresholds, run variants over seeds, report, export.

mod config;
mod export;
mod report;
mod store;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use config::{CampaignConfig, ThresholdSource};
pub use export::{cmd_export, ExportSummary, DEFAULT_EXPORT_LIMIT};
pub use report::{cmd_report, Pooling, Report, ReportOptions, TechniqueSamples};
pub use store::{
    find_runs, image_name, write_run, RunRecord, StoredMember, StoredRun, ARCHIVE_DIR, CLASSES_FILE,
    FEATURES_FILE, IMAGES_DIR, MANIFEST_FILE, MEMBERS_FILE, RUN_FILE,
};

use crate::error::{Error, Result};
use crate::features::DistanceMetric;
use crate::fitness::{calibrate, Thresholds};
use crate::search::{run_variant, SearchSetup, Variant};

/// Creates `dir`, refusing to reuse anything already there.
pub(crate) fn create_fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        return Err(Error::OutputExists(dir.to_path_buf()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))
}

/// Calibrates thresholds for `metric` from `samples` images (the configured
/// count when `None`) and writes them to the new file `out`.
pub fn cmd_calibrate(
    config: &CampaignConfig,
    samples: Option<usize>,
    metric: DistanceMetric,
    out: &Path,
) -> Result<Thresholds> {
    if out.exists() {
        return Err(Error::OutputExists(out.to_path_buf()));
    }
    let n = samples.unwrap_or(config.calibration_samples);
    if n < 2 {
        return Err(Error::Config(format!("calibration needs at least 2 samples, got {n}")));
    }
    let ports = config.ports()?;
    let thresholds = thread_pool(config.workers())?
        .install(|| calibrate(n, metric, &ports, &config.gate_config(), config.calibration_seed))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    thresholds.save(out)?;
    Ok(thresholds)
}

/// Parses `N`, `N..M` (exclusive) or `N..=M` (inclusive) into a seed list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("`{text}` is not a seed, N..M or N..=M"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        vec![num(text)?]
    };
    if seeds.is_empty() {
        return Err(Error::Config(format!("seed range `{text}` is empty")));
    }
    Ok(seeds)
}

/// Directory of one run below the campaign root.
pub fn run_dir(root: &Path, variant: Variant, seed: u64) -> PathBuf {
    root.join(variant.as_str()).join(format!("seed-{seed}"))
}

/// Runs `variant` once per seed into `out/<variant>/seed-N`. Every target
/// directory must be new; the first failing run aborts the command.
pub fn cmd_run(config: &CampaignConfig, variant: Variant, seeds: &[u64], out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let dirs: Vec<PathBuf> = seeds.iter().map(|&s| run_dir(out, variant, s)).collect();
    if let Some(d) = dirs.iter().find(|d| d.exists()) {
        return Err(Error::OutputExists(d.clone()));
    }
    let ports = config.ports()?;
    let pool = thread_pool(config.workers())?;
    pool.install(|| {
        let thresholds = config.thresholds_for(variant.metric(), &ports)?;
        for (&seed, dir) in seeds.iter().zip(&dirs) {
            create_fresh_dir(dir)?;
            let setup = SearchSetup {
                ports: &ports,
                gates: config.gate_config(),
                thresholds,
                params: config.search,
                seed,
            };
            let path = dir.join(MANIFEST_FILE);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let output = run_variant(&setup, variant, BufWriter::new(file))?;
            let mut gates = setup.gates;
            if variant == Variant::Nogan {
                gates.use_delta_gate = false;
            }
            let record = RunRecord {
                variant,
                seed,
                profile: config.profile,
                image_size: config.image_size,
                params: config.search,
                gates,
                thresholds,
                evaluations: output.evaluations,
                members: output.members.len(),
                calls: output.calls,
            };
            write_run(dir, &output, &record, &ports.class_table)?;
        }
        Ok(dirs.clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::SearchParams;
    use crate::Profile;

    fn tiny(profile: Profile) -> CampaignConfig {
        let mut c = CampaignConfig::new(profile);
        c.image_size = 32;
        c.calibration_samples = 12;
        c.workers = Some(2);
        c.search = SearchParams {
            population_size: 4,
            generations: 2,
            initial_populations: 2,
            ..SearchParams::default()
        };
        c
    }

    fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("0..=3").unwrap(), vec![0, 1, 2, 3]);
        for bad in ["", "3..3", "a..4", "1..=x", "-1"] {
            assert!(parse_seeds(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn calibrate_writes_profile_specific_files() {
        let dir = tempfile::tempdir().unwrap();
        let urban = cmd_calibrate(&tiny(Profile::Urban), None, DistanceMetric::Feature, &dir.path().join("u.txt")).unwrap();
        assert!(urban.t_relevance.is_some());
        let mars_path = dir.path().join("m.txt");
        let mars = cmd_calibrate(&tiny(Profile::Mars), Some(8), DistanceMetric::Pixel, &mars_path).unwrap();
        assert_eq!(mars.t_relevance, None);
        let text = fs::read_to_string(&mars_path).unwrap();
        assert!(text.contains("t_diversity") && !text.contains("t_relevance"));
        assert_eq!(Thresholds::load(&mars_path).unwrap(), mars);
        assert!(matches!(
            cmd_calibrate(&tiny(Profile::Mars), Some(8), DistanceMetric::Pixel, &mars_path),
            Err(Error::OutputExists(_))
        ));
        assert!(cmd_calibrate(&tiny(Profile::Mars), Some(1), DistanceMetric::Pixel, &dir.path().join("x.txt")).is_err());
    }

    #[test]
    fn run_writes_loadable_directories_and_refuses_overwrite() {
        let root = tempfile::tempdir().unwrap();
        let config = tiny(Profile::Urban);
        let dirs = cmd_run(&config, Variant::Multi, &[0, 1], root.path()).unwrap();
        assert_eq!(dirs.len(), 2);
        for d in &dirs {
            let run = StoredRun::load(d).unwrap();
            assert_eq!(run.record.variant, Variant::Multi);
            assert_eq!(run.record.evaluations, 4 * (2 + 2));
            for k in 0..run.members.len() {
                assert_eq!(run.realistic(k).unwrap().width(), 32);
                assert_eq!(run.ground_truth(k).unwrap().width(), 32);
                assert!(run.file(k, "prediction").is_file() && run.file(k, "simulated").is_file());
            }
            assert!(d.join(MANIFEST_FILE).is_file());
        }
        assert!(matches!(
            cmd_run(&config, Variant::Multi, &[1, 2], root.path()),
            Err(Error::OutputExists(_))
        ));
        assert!(!run_dir(root.path(), Variant::Multi, 2).exists());
    }

    #[test]
    fn runs_are_byte_identical_across_invocations_and_worker_counts() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut config = tiny(Profile::Mars);
        cmd_run(&config, Variant::Single, &[4], a.path()).unwrap();
        config.workers = Some(1);
        cmd_run(&config, Variant::Single, &[4], b.path()).unwrap();
        assert_eq!(tree(a.path()), tree(b.path()));
    }

    #[test]
    fn random_runs_store_an_image_set() {
        let root = tempfile::tempdir().unwrap();
        let dirs = cmd_run(&tiny(Profile::Mars), Variant::Random, &[0], root.path()).unwrap();
        assert!(dirs[0].join(IMAGES_DIR).join(MEMBERS_FILE).is_file());
        assert!(!dirs[0].join(ARCHIVE_DIR).exists());
        let manifest = fs::read_to_string(dirs[0].join(MANIFEST_FILE)).unwrap();
        assert!(!manifest.contains(r#""event":"archive""#));
    }

    #[test]
    fn report_and_export_over_two_techniques() {
        let root = tempfile::tempdir().unwrap();
        let config = tiny(Profile::Mars);
        cmd_run(&config, Variant::Multi, &[0, 1], root.path()).unwrap();
        cmd_run(&config, Variant::Random, &[0], root.path()).unwrap();

        let out = root.path().join("report");
        let report = cmd_report(&[root.path().to_path_buf()], &out, ReportOptions::default()).unwrap();
        assert_eq!(report.techniques.len(), 2);
        assert_eq!(report.techniques[&Variant::Multi].runs, 2);
        for name in ["accuracy.csv", "diversity_feature.csv", "diversity_pixel.csv", "diversity_runs.csv", "accuracy_pairwise.csv"] {
            assert!(out.join(name).is_file(), "{name}");
        }
        let again = root.path().join("report2");
        cmd_report(&[root.path().to_path_buf()], &again, ReportOptions::default()).unwrap();
        assert_eq!(tree(&out), tree(&again));
        assert!(matches!(
            cmd_report(&[root.path().join("multi")], &out, ReportOptions::default()),
            Err(Error::OutputExists(_))
        ));

        let single = root.path().join("single-report");
        let r = cmd_report(&[run_dir(root.path(), Variant::Multi, 0)], &single, ReportOptions::default()).unwrap();
        assert_eq!(r.techniques.len(), 1);
        assert!(!single.join("accuracy_pairwise.csv").exists());

        let pool: usize = find_runs(&[root.path().join("multi"), root.path().join("random")])
            .unwrap()
            .iter()
            .map(|d| StoredRun::load(d).unwrap().members.len())
            .sum();
        let ex = root.path().join("export");
        let summary = cmd_export(&[root.path().join("multi"), root.path().join("random")], 3, 9, &ex).unwrap();
        assert_eq!(summary.pool, pool);
        assert_eq!(summary.exported, pool.min(3));
        assert_eq!(fs::read_dir(ex.join("images")).unwrap().count(), summary.exported);
        assert_eq!(fs::read_dir(ex.join("masks")).unwrap().count(), summary.exported);
    }

    #[test]
    fn across_run_pooling_counts_union_pairs() {
        let root = tempfile::tempdir().unwrap();
        cmd_run(&tiny(Profile::Mars), Variant::Random, &[0, 1], root.path()).unwrap();
        let sizes: Vec<usize> = find_runs(&[root.path().to_path_buf()])
            .unwrap()
            .iter()
            .map(|d| StoredRun::load(d).unwrap().members.len())
            .collect();
        let pairs = |n: usize| n * n.saturating_sub(1) / 2;
        let options = ReportOptions { pooling: Pooling::AcrossRuns, pixel_diversity: false };
        let r = cmd_report(&[root.path().to_path_buf()], &root.path().join("a"), options).unwrap();
        assert_eq!(r.techniques[&Variant::Random].feature_diversity.len(), pairs(sizes.iter().sum()));
        let r = cmd_report(&[root.path().to_path_buf()], &root.path().join("w"), ReportOptions { pooling: Pooling::WithinRun, ..options }).unwrap();
        assert_eq!(r.techniques[&Variant::Random].feature_diversity.len(), sizes.iter().map(|&n| pairs(n)).sum::<usize>());
        assert!(r.techniques[&Variant::Random].pixel_diversity.is_empty());
    }
}
