//! Feature-space distances used by the similarity objective, the archive and
//! the diversity reports.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::pixel_distance;
use crate::raster::RgbImage;

/// A fixed-length embedding of an image. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster(format!("non-finite feature value {bad}")));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Which distance defines "similar" for a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Euclidean distance between feature vectors.
    Feature,
    /// Fraction of mismatching pixels between realistic images.
    Pixel,
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::Feature => "feature",
            DistanceMetric::Pixel => "pixel",
        })
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature" => Ok(DistanceMetric::Feature),
            "pixel" => Ok(DistanceMetric::Pixel),
            other => Err(Error::Config(format!("unknown distance metric `{other}`"))),
        }
    }
}

pub fn euclidean_distance(u: &FeatureVector, v: &FeatureVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(u.0
        .iter()
        .zip(&v.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Distance to the nearest member and that member's index; `(+inf, None)` for an empty set.
pub fn closest<'a, I>(f: &FeatureVector, members: I) -> Result<(f64, Option<usize>)>
where
    I: IntoIterator<Item = &'a FeatureVector>,
{
    let mut best = (f64::INFINITY, None);
    for (i, m) in members.into_iter().enumerate() {
        let d = euclidean_distance(f, m)?;
        // strict: the earliest member wins ties
        if d < best.0 || best.1.is_none() {
            best = (d, Some(i));
        }
    }
    Ok(best)
}

pub fn distance_from_closest(f: &FeatureVector, archive: &[FeatureVector]) -> Result<f64> {
    Ok(closest(f, archive)?.0)
}

/// All `n(n-1)/2` unordered-pair distances, in `(i, j)` lexicographic order with `i < j`.
pub fn pairwise_with<T, F>(items: &[T], distance: F) -> Result<Vec<f64>>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    if items.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pairwise distances need at least 2 items, got {}",
            items.len()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..items.len())
        .into_par_iter()
        .map(|i| {
            items[i + 1..]
                .iter()
                .map(|b| distance(&items[i], b))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn pairwise_feature_distances(features: &[FeatureVector]) -> Result<Vec<f64>> {
    pairwise_with(features, euclidean_distance)
}

pub fn pairwise_pixel_distances(images: &[RgbImage]) -> Result<Vec<f64>> {
    pairwise_with(images, pixel_distance)
}
