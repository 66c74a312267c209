//! Accuracy and diversity tables over finished runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::store::{find_runs, StoredRun};
use super::create_fresh_dir;
use crate::error::{Error, Result};
use crate::features::{pairwise_feature_distances, pairwise_pixel_distances, FeatureVector};
use crate::raster::RgbImage;
use crate::search::Variant;
use crate::stats::{compare_report, descriptive, DescriptiveRow};

/// How pairwise diversity is collected over the runs of one technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Pairs within each run, the multisets of all runs concatenated.
    #[default]
    WithinRun,
    /// Pairs over the union of all runs.
    AcrossRuns,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within-run" => Ok(Pooling::WithinRun),
            "across-runs" => Ok(Pooling::AcrossRuns),
            _ => Err(Error::Config(format!("unknown pooling `{s}` (expected within-run or across-runs)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub pooling: Pooling,
    /// Pixel diversity loads every realistic image and is quadratic in archive size.
    pub pixel_diversity: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            pooling: Pooling::WithinRun,
            pixel_diversity: true,
        }
    }
}

/// Per-technique samples, pooled over runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TechniqueSamples {
    pub runs: usize,
    pub accuracy: Vec<f64>,
    pub feature_diversity: Vec<f64>,
    pub pixel_diversity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub techniques: BTreeMap<Variant, TechniqueSamples>,
    pub files: Vec<PathBuf>,
}

const METRICS: [&str; 3] = ["accuracy", "diversity_feature", "diversity_pixel"];

fn pick<'a>(s: &'a TechniqueSamples, metric: &str) -> &'a [f64] {
    match metric {
        "accuracy" => &s.accuracy,
        "diversity_feature" => &s.feature_diversity,
        _ => &s.pixel_diversity,
    }
}

fn descriptive_cells(sample: &[f64]) -> Result<String> {
    if sample.is_empty() {
        Ok("0,,,,,,,".into())
    } else {
        Ok(descriptive(sample)?.to_csv_fields())
    }
}

/// Pairwise distances, empty for fewer than two items.
fn feature_pairs(items: &[FeatureVector]) -> Result<Vec<f64>> {
    if items.len() < 2 {
        return Ok(Vec::new());
    }
    pairwise_feature_distances(items)
}

fn pixel_pairs(items: &[RgbImage]) -> Result<Vec<f64>> {
    if items.len() < 2 {
        return Ok(Vec::new());
    }
    pairwise_pixel_distances(items)
}

fn load_images(run: &StoredRun) -> Result<Vec<RgbImage>> {
    (0..run.members.len()).into_par_iter().map(|k| run.realistic(k)).collect()
}

/// Reads the runs under `run_dirs`, groups them by variant and writes the
/// descriptive tables (and pairwise comparisons for two or more groups) into
/// the new directory `out`.
pub fn cmd_report(run_dirs: &[PathBuf], out: &Path, options: ReportOptions) -> Result<Report> {
    let dirs = find_runs(run_dirs)?;
    let runs: Vec<StoredRun> = dirs.iter().map(|d| StoredRun::load(d)).collect::<Result<_>>()?;
    if let Some(first) = runs.first() {
        if let Some(other) = runs.iter().find(|r| r.record.profile != first.record.profile) {
            return Err(Error::Config(format!(
                "{} and {} come from different profiles",
                first.dir.display(),
                other.dir.display()
            )));
        }
    }

    let mut techniques: BTreeMap<Variant, TechniqueSamples> = BTreeMap::new();
    let mut per_run = String::from("technique,run,metric,");
    per_run.push_str(DescriptiveRow::CSV_HEADER);
    per_run.push('\n');
    let mut union_features: BTreeMap<Variant, Vec<FeatureVector>> = BTreeMap::new();
    let mut union_images: BTreeMap<Variant, Vec<RgbImage>> = BTreeMap::new();

    for run in &runs {
        let v = run.record.variant;
        let t = techniques.entry(v).or_default();
        t.runs += 1;
        // stored members are relevant by construction; the filter guards hand-edited runs
        t.accuracy
            .extend(run.members.iter().filter(|m| m.f_accuracy < crate::fitness::PENALTY).map(|m| m.f_accuracy));
        let feature = feature_pairs(&run.features)?;
        let images = if options.pixel_diversity { load_images(run)? } else { Vec::new() };
        let pixel = if options.pixel_diversity { pixel_pairs(&images)? } else { Vec::new() };
        let label = run.dir.display();
        let _ = writeln!(per_run, "{v},{label},diversity_feature,{}", descriptive_cells(&feature)?);
        if options.pixel_diversity {
            let _ = writeln!(per_run, "{v},{label},diversity_pixel,{}", descriptive_cells(&pixel)?);
        }
        match options.pooling {
            Pooling::WithinRun => {
                t.feature_diversity.extend(feature);
                t.pixel_diversity.extend(pixel);
            }
            Pooling::AcrossRuns => {
                union_features.entry(v).or_default().extend(run.features.iter().cloned());
                union_images.entry(v).or_default().extend(images);
            }
        }
    }
    if options.pooling == Pooling::AcrossRuns {
        for (v, t) in techniques.iter_mut() {
            t.feature_diversity = feature_pairs(&union_features[v])?;
            if options.pixel_diversity {
                t.pixel_diversity = pixel_pairs(&union_images[v])?;
            }
        }
    }

    create_fresh_dir(out)?;
    let mut files = Vec::new();
    let mut write = |name: &str, text: &str| -> Result<()> {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        files.push(p);
        Ok(())
    };
    for metric in METRICS {
        if metric == "diversity_pixel" && !options.pixel_diversity {
            continue;
        }
        let mut text = format!("technique,runs,{}\n", DescriptiveRow::CSV_HEADER);
        for (v, t) in &techniques {
            let _ = writeln!(text, "{v},{},{}", t.runs, descriptive_cells(pick(t, metric))?);
        }
        write(&format!("{metric}.csv"), &text)?;
    }
    write("diversity_runs.csv", &per_run)?;
    if techniques.len() >= 2 {
        for metric in METRICS {
            if metric == "diversity_pixel" && !options.pixel_diversity {
                continue;
            }
            let sets: Vec<(String, Vec<f64>)> = techniques
                .iter()
                .filter(|(_, t)| !pick(t, metric).is_empty())
                .map(|(v, t)| (v.to_string(), pick(t, metric).to_vec()))
                .collect();
            if sets.len() >= 2 {
                write(&format!("{metric}_pairwise.csv"), &compare_report(&sets)?.to_csv())?;
            }
        }
    }
    Ok(Report { techniques, files })
}
