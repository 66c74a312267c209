//! Descriptive statistics, the Mann-Whitney U-test and the Vargha-Delaney
//! effect size used to compare techniques.
//!
//! Percentiles use the nearest-rank convention everywhere (the `ceil(p*n)`-th
//! order statistic), so calibration thresholds and report tables agree.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Nearest-rank percentile of an ascending-sorted, non-empty sample; `p` in percent.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn percentile(sample: &[f64], p: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("percentile of an empty sample".into()));
    }
    Ok(percentile_sorted(&sorted(sample), p))
}

/// Median with the even-count rule "mean of the two middle values".
pub fn median(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("median of an empty sample".into()));
    }
    let v = sorted(sample);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub count: usize,
    pub min: f64,
    pub p5: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub average: f64,
}

impl DescriptiveRow {
    pub const CSV_HEADER: &'static str = "count,min,p5,q1,median,q3,max,average";

    pub fn to_csv_fields(&self) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.count, self.min, self.p5, self.q1, self.median, self.q3, self.max, self.average
        )
    }
}

pub fn descriptive(sample: &[f64]) -> Result<DescriptiveRow> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("descriptive statistics of an empty sample".into()));
    }
    let v = sorted(sample);
    Ok(DescriptiveRow {
        count: v.len(),
        min: v[0],
        p5: percentile_sorted(&v, 5.0),
        q1: percentile_sorted(&v, 25.0),
        median: percentile_sorted(&v, 50.0),
        q3: percentile_sorted(&v, 75.0),
        max: v[v.len() - 1],
        average: v.iter().sum::<f64>() / v.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample: pairs where x > y, ties counting one half.
    pub u: f64,
    /// Two-sided p-value from the tie- and continuity-corrected normal approximation.
    pub p_value: f64,
}

/// Midranks (1-based) of the pooled sample, plus the tie-correction term `sum(t^3 - t)`.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientData("both samples must be non-empty".into()));
    }
    Ok(())
}

fn u_statistic(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let m = x.len() as f64;
    let rank_sum: f64 = ranks[..x.len()].iter().sum();
    (rank_sum - m * (m + 1.0) / 2.0, ties)
}

pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    check_samples(x, y)?;
    let (u, ties) = u_statistic(x, y);
    let (m, n) = (x.len() as f64, y.len() as f64);
    let total = m + n;
    let mean = m * n / 2.0;
    let variance = if total > 1.0 {
        m * n / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)))
    } else {
        0.0
    };
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).clamp(0.0, 1.0)
    };
    Ok(MannWhitney { u, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    FirstHigher,
    SecondHigher,
    Equivalent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub a12: f64,
    pub magnitude: Magnitude,
    pub direction: Direction,
}

impl EffectSize {
    /// Classifies an A12 value with the 0.56 / 0.64 / 0.71 cutoffs and their
    /// mirrors 0.44 / 0.36 / 0.29 below one half.
    pub fn from_a12(a12: f64) -> Self {
        let magnitude = if a12 >= 0.71 || a12 <= 0.29 {
            Magnitude::Large
        } else if a12 >= 0.64 || a12 <= 0.36 {
            Magnitude::Medium
        } else if a12 >= 0.56 || a12 <= 0.44 {
            Magnitude::Small
        } else {
            Magnitude::Negligible
        };
        let direction = match (magnitude, a12.partial_cmp(&0.5)) {
            (Magnitude::Negligible, _) => Direction::Equivalent,
            (_, Some(Ordering::Greater)) => Direction::FirstHigher,
            _ => Direction::SecondHigher,
        };
        Self {
            a12,
            magnitude,
            direction,
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        })
    }
}

/// Probability that a draw from `x` exceeds a draw from `y`, ties counting one half.
pub fn vargha_delaney_a12(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    check_samples(x, y)?;
    let (u, _) = u_statistic(x, y);
    Ok(EffectSize::from_a12(u / (x.len() as f64 * y.len() as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCell {
    pub a12: f64,
    pub p_value: f64,
}

/// Full pairwise comparison matrix; the diagonal is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<PairCell>>>,
}

impl PairwiseTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("technique");
        for name in &self.names {
            let _ = write!(out, ",{name} a12,{name} p");
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.cells) {
            out.push_str(name);
            for cell in row {
                match cell {
                    Some(c) => {
                        let _ = write!(out, ",{:.4},{:.4e}", c.a12, c.p_value);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Compares every ordered pair of named samples with A12 and the U-test.
pub fn compare_report(sets: &[(String, Vec<f64>)]) -> Result<PairwiseTable> {
    if sets.len() < 2 {
        return Err(Error::InsufficientData("comparison needs at least two sets".into()));
    }
    if let Some((name, _)) = sets.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::InsufficientData(format!("set `{name}` is empty")));
    }
    let mut cells = Vec::with_capacity(sets.len());
    for (i, (_, x)) in sets.iter().enumerate() {
        let mut row = Vec::with_capacity(sets.len());
        for (j, (_, y)) in sets.iter().enumerate() {
            row.push(if i == j {
                None
            } else {
                Some(PairCell {
                    a12: vargha_delaney_a12(x, y)?.a12,
                    p_value: mann_whitney_u(x, y)?.p_value,
                })
            });
        }
        cells.push(row);
    }
    Ok(PairwiseTable {
        names: sets.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}
