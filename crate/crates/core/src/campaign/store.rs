//! On-disk layout of a finished run.
//!
//! ```text
//! seed-N/
//!   manifest.ndjson
//!   run.json
//!   archive/            (images/ for the random baseline)
//!     classes.txt
//!     members.csv
//!     features.csv
//!     NNNN_simulated.png  NNNN_realistic.png  NNNN_mask.png  NNNN_prediction.png
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{Genome, PortCallCounts};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::fitness::{GateConfig, Thresholds};
use crate::raster::{load_image, load_mask, save_image, save_mask, ClassMask, ClassTable, RgbImage};
use crate::search::{Individual, RunOutput, SearchParams, Variant};
use crate::Profile;

pub const MANIFEST_FILE: &str = "manifest.ndjson";
pub const RUN_FILE: &str = "run.json";
pub const ARCHIVE_DIR: &str = "archive";
pub const IMAGES_DIR: &str = "images";
pub const MEMBERS_FILE: &str = "members.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const CLASSES_FILE: &str = "classes.txt";

/// Summary written to `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub seed: u64,
    pub profile: Profile,
    pub image_size: u32,
    pub params: SearchParams,
    pub gates: GateConfig,
    pub thresholds: Thresholds,
    pub evaluations: u64,
    pub members: usize,
    pub calls: PortCallCounts,
}

impl RunRecord {
    /// Name of the member directory inside the run directory.
    pub fn members_dir(&self) -> &'static str {
        members_dir_name(self.variant)
    }
}

fn members_dir_name(variant: Variant) -> &'static str {
    match variant {
        Variant::Random => IMAGES_DIR,
        _ => ARCHIVE_DIR,
    }
}

/// One row of `members.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMember {
    pub index: usize,
    pub id: u64,
    pub generation: usize,
    pub f_accuracy: f64,
    pub perf_realistic: f64,
    pub perf_simulated: Option<f64>,
    pub delta: Option<f64>,
    pub proportion: f64,
    pub on_road: bool,
    pub genome: Vec<f64>,
}

pub fn image_name(index: usize, kind: &str) -> String {
    format!("{index:04}_{kind}.png")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn members_csv(members: &[Individual]) -> String {
    let dims = members.first().map_or(0, |m| m.genome.len());
    let mut out = String::from("index,id,generation,f_accuracy,perf_realistic,perf_simulated,delta,proportion,on_road");
    for d in 0..dims {
        let _ = write!(out, ",g{d}");
    }
    out.push('\n');
    for (k, m) in members.iter().enumerate() {
        let a = &m.assessment;
        let _ = write!(
            out,
            "{k},{},{},{},{},{},{},{},{}",
            m.id,
            m.generation,
            a.f_accuracy,
            a.perf_realistic,
            opt(a.perf_simulated),
            opt(a.delta),
            a.proportion,
            m.scene.on_road
        );
        for g in m.genome.values() {
            let _ = write!(out, ",{g}");
        }
        out.push('\n');
    }
    out
}

fn features_csv(members: &[Individual]) -> String {
    let dims = members.first().map_or(0, |m| m.feature.len());
    let mut out = String::from("index");
    for d in 0..dims {
        let _ = write!(out, ",f{d}");
    }
    out.push('\n');
    for (k, m) in members.iter().enumerate() {
        let _ = write!(out, "{k}");
        for v in m.feature.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Writes the member directory and `run.json` next to an existing manifest.
pub fn write_run(dir: &Path, output: &RunOutput, record: &RunRecord, table: &ClassTable) -> Result<()> {
    let members_dir = dir.join(members_dir_name(output.variant));
    fs::create_dir_all(&members_dir).map_err(|e| Error::io(&members_dir, e))?;
    table.save(&members_dir.join(CLASSES_FILE))?;
    write_file(&members_dir.join(MEMBERS_FILE), &members_csv(&output.members))?;
    write_file(&members_dir.join(FEATURES_FILE), &features_csv(&output.members))?;
    output.members.par_iter().enumerate().try_for_each(|(k, m)| -> Result<()> {
        save_image(&m.scene.simulated, &members_dir.join(image_name(k, "simulated")))?;
        save_image(&m.realistic, &members_dir.join(image_name(k, "realistic")))?;
        save_mask(&m.scene.ground_truth, &members_dir.join(image_name(k, "mask")))?;
        save_mask(&m.prediction, &members_dir.join(image_name(k, "prediction")))
    })?;
    write_file(&dir.join(RUN_FILE), &(serde_json::to_string_pretty(record)? + "\n"))
}

fn malformed(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Malformed(format!("{}: {what}", path.display()))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| malformed(path, format!("`{s}` is not a number")))
}

fn parse_opt(path: &Path, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(path, s).map(Some)
    }
}

fn parse_members(path: &Path, text: &str) -> Result<Vec<StoredMember>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| malformed(path, "missing header"))?.split(',').collect();
    if header.len() < 9 || header[..9] != *"index,id,generation,f_accuracy,perf_realistic,perf_simulated,delta,proportion,on_road".split(',').collect::<Vec<_>>() {
        return Err(malformed(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(malformed(path, format!("row {row} has {} fields, expected {}", f.len(), header.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| malformed(path, format!("`{s}` is not an integer")));
        let index = int(f[0])? as usize;
        if index != row {
            return Err(malformed(path, format!("row {row} carries index {index}")));
        }
        out.push(StoredMember {
            index,
            id: int(f[1])?,
            generation: int(f[2])? as usize,
            f_accuracy: parse_f64(path, f[3])?,
            perf_realistic: parse_f64(path, f[4])?,
            perf_simulated: parse_opt(path, f[5])?,
            delta: parse_opt(path, f[6])?,
            proportion: parse_f64(path, f[7])?,
            on_road: f[8].parse().map_err(|_| malformed(path, format!("`{}` is not a boolean", f[8])))?,
            genome: f[9..].iter().map(|s| parse_f64(path, s)).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

fn parse_features(path: &Path, text: &str) -> Result<Vec<FeatureVector>> {
    let mut lines = text.lines();
    lines.next().ok_or_else(|| malformed(path, "missing header"))?;
    lines
        .enumerate()
        .map(|(row, line)| {
            let mut f = line.split(',');
            if f.next() != Some(row.to_string().as_str()) {
                return Err(malformed(path, format!("row {row} is out of order")));
            }
            FeatureVector::new(f.map(|s| parse_f64(path, s)).collect::<Result<_>>()?)
        })
        .collect()
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub members: Vec<StoredMember>,
    pub features: Vec<FeatureVector>,
    pub class_table: Arc<ClassTable>,
}

impl StoredRun {
    pub fn load(dir: &Path) -> Result<Self> {
        let run_path = dir.join(RUN_FILE);
        let text = fs::read_to_string(&run_path).map_err(|e| Error::io(&run_path, e))?;
        let record: RunRecord = serde_json::from_str(&text)?;
        let members_dir = dir.join(record.members_dir());
        let read = |name: &str| {
            let p = members_dir.join(name);
            fs::read_to_string(&p).map(|t| (p.clone(), t)).map_err(|e| Error::io(&p, e))
        };
        let (mp, mt) = read(MEMBERS_FILE)?;
        let members = parse_members(&mp, &mt)?;
        let (fp, ft) = read(FEATURES_FILE)?;
        let features = parse_features(&fp, &ft)?;
        if members.len() != record.members || features.len() != record.members {
            return Err(malformed(
                dir,
                format!(
                    "run.json lists {} members, members.csv {} and features.csv {}",
                    record.members,
                    members.len(),
                    features.len()
                ),
            ));
        }
        let class_table = Arc::new(ClassTable::load(&members_dir.join(CLASSES_FILE))?);
        Ok(Self {
            dir: dir.to_path_buf(),
            record,
            members,
            features,
            class_table,
        })
    }

    pub fn file(&self, index: usize, kind: &str) -> PathBuf {
        self.dir.join(self.record.members_dir()).join(image_name(index, kind))
    }

    pub fn realistic(&self, index: usize) -> Result<RgbImage> {
        load_image(&self.file(index, "realistic"))
    }

    pub fn ground_truth(&self, index: usize) -> Result<ClassMask> {
        load_mask(&self.file(index, "mask"), self.class_table.clone())
    }

    pub fn genome(&self, index: usize) -> Genome {
        Genome::new(self.members[index].genome.clone())
    }
}

/// Expands each path into run directories: a directory holding `run.json`
/// is a run; otherwise its subdirectories are searched, in name order.
pub fn find_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
        if dir.join(RUN_FILE).is_file() {
            out.push(dir.to_path_buf());
            return Ok(());
        }
        if depth == 0 {
            return Ok(());
        }
        let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        for d in subdirs {
            walk(&d, depth - 1, out)?;
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in paths {
        let before = out.len();
        walk(p, 2, &mut out)?;
        if out.len() == before {
            return Err(Error::Malformed(format!("{} contains no run directory", p.display())));
        }
    }
    Ok(out)
}
