//! Retraining-set export: realistic images with their ground-truth masks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::create_fresh_dir;
use super::store::{find_runs, StoredRun};
use crate::error::{Error, Result};

pub const DEFAULT_EXPORT_LIMIT: usize = 900;

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSummary {
    /// Members available across all runs.
    pub pool: usize,
    pub exported: usize,
}

/// Copies up to `max` members, drawn uniformly without replacement from the
/// union of the given runs, into `out/images`, `out/masks` and `out/index.csv`.
pub fn cmd_export(run_dirs: &[PathBuf], max: usize, seed: u64, out: &Path) -> Result<ExportSummary> {
    let runs: Vec<StoredRun> = find_runs(run_dirs)?
        .iter()
        .map(|d| StoredRun::load(d))
        .collect::<Result<_>>()?;
    let pool: Vec<(usize, usize)> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, run)| (0..run.members.len()).map(move |k| (r, k)))
        .collect();
    if pool.is_empty() {
        return Err(Error::InsufficientData("the given runs hold no members to export".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, pool.len(), max.min(pool.len())).into_vec();
    chosen.sort_unstable();

    create_fresh_dir(out)?;
    let (images, masks) = (out.join("images"), out.join("masks"));
    for d in [&images, &masks] {
        fs::create_dir(d).map_err(|e| Error::io(d, e))?;
    }
    let mut index = String::from("index,source_run,source_index,id,f_accuracy,genome\n");
    for (n, &p) in chosen.iter().enumerate() {
        let (r, k) = pool[p];
        let run = &runs[r];
        let name = format!("{n:04}.png");
        for (kind, dir) in [("realistic", &images), ("mask", &masks)] {
            let (from, to) = (run.file(k, kind), dir.join(&name));
            fs::copy(&from, &to).map_err(|e| Error::io(&from, e))?;
        }
        let m = &run.members[k];
        let genome: Vec<String> = m.genome.iter().map(f64::to_string).collect();
        let _ = writeln!(
            index,
            "{n},{},{k},{},{},{}",
            run.dir.display(),
            m.id,
            m.f_accuracy,
            genome.join(" ")
        );
    }
    let p = out.join("index.csv");
    fs::write(&p, index).map_err(|e| Error::io(&p, e))?;
    Ok(ExportSummary {
        pool: pool.len(),
        exported: chosen.len(),
    })
}
