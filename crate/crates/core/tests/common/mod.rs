#![allow(dead_code)]

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use segtest::backends::{Genome, PortCallCounts, SceneData};
use segtest::campaign::{write_run, RunRecord, MANIFEST_FILE};
use segtest::features::{DistanceMetric, FeatureVector};
use segtest::fitness::{Assessment, FitnessPair, GateConfig, Thresholds};
use segtest::raster::{ClassMask, ClassTable, RgbImage};
use segtest::search::{FeaturePoint, Individual, RunOutput, SearchParams, Variant};
use segtest::Profile;

/// A tiny synthetic archive member whose pixels and feature encode `id`.
pub fn member(id: u64, table: &Arc<ClassTable>) -> Individual {
    let b = id.to_le_bytes();
    let simulated = RgbImage::filled(4, 4, [b[0], b[1], 0]).unwrap();
    let realistic = RgbImage::filled(4, 4, [b[0], b[1], 1]).unwrap();
    let labels: Vec<u8> = (0..16).map(|k| ((id + k) % 5) as u8).collect();
    let ground_truth = ClassMask::from_raw(4, 4, labels.clone(), table.clone()).unwrap();
    let prediction = ClassMask::from_raw(4, 4, labels.into_iter().rev().collect(), table.clone()).unwrap();
    let f_accuracy = (id % 97) as f64 / 97.0;
    Individual {
        id,
        generation: 0,
        genome: Genome::new(vec![id as f64, 0.5, -0.25]),
        scene: Arc::new(SceneData::new(simulated, ground_truth, true).unwrap()),
        realistic: Arc::new(realistic),
        prediction: Arc::new(prediction),
        prediction_simulated: None,
        feature: Arc::new(FeatureVector::new(vec![id as f64, 1.0]).unwrap()),
        assessment: Assessment {
            f_accuracy,
            perf_realistic: f_accuracy,
            perf_simulated: None,
            delta: None,
            proportion: 0.1,
            gate: None,
        },
        fitness: FitnessPair { f_accuracy, f_similarity: 0.0 },
        rank: 0,
        crowding: 0.0,
    }
}

/// Writes a run directory holding `ids` as its archive.
pub fn synthetic_run(dir: &Path, seed: u64, ids: impl IntoIterator<Item = u64>) {
    let table = Arc::new(ClassTable::for_profile(Profile::Urban));
    let members: Vec<Individual> = ids.into_iter().map(|id| member(id, &table)).collect();
    let output = RunOutput {
        variant: Variant::Multi,
        seed,
        evaluations: members.len() as u64,
        members,
        calls: PortCallCounts::default(),
    };
    let record = RunRecord {
        variant: Variant::Multi,
        seed,
        profile: Profile::Urban,
        image_size: 4,
        params: SearchParams::default(),
        gates: GateConfig::for_profile(Profile::Urban),
        thresholds: Thresholds::new(Profile::Urban, DistanceMetric::Feature, 1.0, Some(0.0)).unwrap(),
        evaluations: output.evaluations,
        members: output.members.len(),
        calls: output.calls,
    };
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(MANIFEST_FILE), "").unwrap();
    write_run(dir, &output, &record, &table).unwrap();
}

/// Every file below `dir` with its bytes, sorted by relative path.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

// ---- brute-force oracles ----

pub fn brute_fronts(f: &[FitnessPair]) -> Vec<Vec<usize>> {
    let dom = |a: &FitnessPair, b: &FitnessPair| {
        let no_worse = a.f_accuracy <= b.f_accuracy && a.f_similarity <= b.f_similarity;
        no_worse && (a.f_accuracy, a.f_similarity) != (b.f_accuracy, b.f_similarity)
    };
    let mut left: Vec<usize> = (0..f.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dom(&f[j], &f[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

pub fn class_pixels(labels: &[u8], class: u8) -> HashSet<usize> {
    labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect()
}

pub fn brute_iou(p: &[u8], g: &[u8], class: u8) -> Option<f64> {
    let (ps, gs) = (class_pixels(p, class), class_pixels(g, class));
    let union = ps.union(&gs).count();
    (union > 0).then(|| ps.intersection(&gs).count() as f64 / union as f64)
}

/// Number of ways each U value arises among all splits of m + n distinct values.
pub fn u_distribution(m: usize, n: usize) -> Vec<u128> {
    // f[i][j] = distribution for sample sizes (i, j); the largest value either
    // belongs to x (adding j to U) or to y
    let mut f = vec![vec![Vec::<u128>::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            f[i][j] = if i == 0 || j == 0 {
                vec![1]
            } else {
                let mut d = vec![0u128; i * j + 1];
                for (u, c) in f[i - 1][j].iter().enumerate() {
                    d[u + j] += c;
                }
                for (u, c) in f[i][j - 1].iter().enumerate() {
                    d[u] += c;
                }
                d
            };
        }
    }
    f[m][n].clone()
}


// ---- scripted archive trace ----

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Ignored,
    Added(usize),
    Replaced(usize),
    Rejected,
}
use Step::*;

/// (accuracy, position, outcome) with T_diversity = 1, worked out by hand.
pub const SCRIPT: [(f64, f64, Step); 50] = [
    (2.0, 0.0, Ignored),
    (0.8, 0.0, Added(0)),
    (0.9, 0.5, Rejected),
    (0.75, 0.5, Replaced(0)),
    (0.625, 1.5, Replaced(0)), // exactly T away is not farther than T
    (0.5, 3.0, Added(1)),
    (2.0, 10.0, Ignored),
    (0.875, 10.0, Added(2)),
    (0.9375, 10.25, Rejected),
    (0.875, 10.25, Rejected), // equal accuracy does not replace
    (0.25, 2.25, Replaced(0)), // equidistant from slots 0 and 1: earliest wins
    (0.375, 2.75, Replaced(1)),
    (0.0, 5.0, Added(3)),
    (0.5, 4.5, Rejected),
    (2.0, 4.5, Ignored),
    (0.125, 8.5, Added(4)),
    (0.0625, 9.25, Replaced(2)), // equidistant from slots 2 and 4
    (0.1, 9.0, Rejected),
    (0.5, 20.0, Added(5)),
    (0.5, 21.0, Rejected),
    (0.5, 21.25, Added(6)),
    (0.25, 20.625, Replaced(5)),
    (0.125, 21.0, Replaced(6)),
    (2.0, 21.0, Ignored),
    (1.0, 30.0, Added(7)),
    (1.0, 30.0, Rejected),
    (0.96875, 30.0, Replaced(7)),
    (0.96875, 31.0, Rejected),
    (0.9375, 31.0, Replaced(7)),
    (0.9, 32.5, Added(8)),
    (0.0, -1.0, Added(9)),
    (0.0, -0.5, Rejected),
    (0.0, -2.5, Added(10)),
    (2.0, -2.5, Ignored),
    (0.5, 40.0, Added(11)),
    (0.4375, 40.5, Replaced(11)),
    (0.375, 41.0, Replaced(11)),
    (0.3125, 41.5, Replaced(11)),
    (0.25, 42.5, Replaced(11)),
    (0.5, 41.25, Added(12)),
    (0.25, 41.875, Rejected), // tie between slots 11 and 12 goes to 11, equal accuracy
    (0.125, 41.875, Replaced(11)),
    (0.0625, 41.5, Replaced(12)),
    (0.75, 50.0, Added(13)),
    (0.75, 60.0, Added(14)),
    (0.75, 70.0, Added(15)),
    (0.5, 65.0, Added(16)),
    (0.5, 65.0, Rejected),
    (2.0, 65.0, Ignored),
    (0.25, 65.0, Replaced(16)),
];

pub const FINAL_IDS: [u64; 17] = [11, 12, 17, 13, 16, 22, 23, 29, 30, 31, 33, 42, 43, 44, 45, 46, 50];

pub fn point(id: u64, f_accuracy: f64, x: f64) -> FeaturePoint {
    FeaturePoint {
        id,
        f_accuracy,
        feature: FeatureVector::new(vec![x, 0.0]).unwrap(),
    }
}
