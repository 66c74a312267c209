//! The archive of relevant, mutually distant, low-accuracy individuals.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{euclidean_distance, DistanceMetric, FeatureVector};
use crate::fitness::PENALTY;

/// What the archive needs to know about a candidate.
pub trait ArchiveMember {
    fn id(&self) -> u64;
    fn f_accuracy(&self) -> f64;
    fn distance(&self, other: &Self, metric: DistanceMetric) -> Result<f64>;
}

/// Minimal archive member carrying only a feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint {
    pub id: u64,
    pub f_accuracy: f64,
    pub feature: FeatureVector,
}

impl ArchiveMember for FeaturePoint {
    fn id(&self) -> u64 {
        self.id
    }

    fn f_accuracy(&self) -> f64 {
        self.f_accuracy
    }

    fn distance(&self, other: &Self, metric: DistanceMetric) -> Result<f64> {
        match metric {
            DistanceMetric::Feature => euclidean_distance(&self.feature, &other.feature),
            DistanceMetric::Pixel => Err(Error::UnsupportedOperation(
                "feature points carry no image for pixel distance".into(),
            )),
        }
    }
}

/// How candidates are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchivePolicy {
    /// Distance threshold with in-place replacement of the closest member.
    Diverse,
    /// Every relevant individual is kept, each at most once.
    KeepAll,
}

/// Result of one update attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ArchiveEvent {
    /// Not relevant; the archive is unchanged.
    Ignored,
    Added {
        slot: usize,
        /// Distance to the closest member at insertion time (`None` for an empty archive).
        distance: Option<f64>,
    },
    Replaced {
        slot: usize,
        distance: f64,
        replaced_id: u64,
        replaced_accuracy: f64,
    },
    Rejected {
        distance: f64,
    },
    /// Already a member (only under [`ArchivePolicy::KeepAll`]).
    Duplicate,
}

impl ArchiveEvent {
    pub fn label(&self) -> &'static str {
        match self {
            ArchiveEvent::Ignored => "ignored",
            ArchiveEvent::Added { .. } => "added",
            ArchiveEvent::Replaced { .. } => "replaced",
            ArchiveEvent::Rejected { .. } => "rejected",
            ArchiveEvent::Duplicate => "duplicate",
        }
    }

    pub fn changed(&self) -> bool {
        matches!(self, ArchiveEvent::Added { .. } | ArchiveEvent::Replaced { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Archive<T> {
    members: Vec<T>,
    metric: DistanceMetric,
    t_diversity: f64,
    policy: ArchivePolicy,
    ids: HashSet<u64>,
}

impl<T: ArchiveMember> Archive<T> {
    pub fn new(metric: DistanceMetric, t_diversity: f64, policy: ArchivePolicy) -> Self {
        Self {
            members: Vec::new(),
            metric,
            t_diversity,
            policy,
            ids: HashSet::new(),
        }
    }

    pub fn members(&self) -> &[T] {
        &self.members
    }

    pub fn into_members(self) -> Vec<T> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn t_diversity(&self) -> f64 {
        self.t_diversity
    }

    pub fn policy(&self) -> ArchivePolicy {
        self.policy
    }

    pub fn contains_id(&self, id: u64) -> bool {
        self.ids.contains(&id)
    }

    /// Distance to the nearest member and its slot; the earliest slot wins ties.
    pub fn closest(&self, candidate: &T) -> Result<(f64, Option<usize>)> {
        let mut best = (f64::INFINITY, None);
        for (slot, m) in self.members.iter().enumerate() {
            let d = candidate.distance(m, self.metric)?;
            if d < best.0 || best.1.is_none() {
                best = (d, Some(slot));
            }
        }
        Ok(best)
    }

    pub fn distance_from_closest(&self, candidate: &T) -> Result<f64> {
        Ok(self.closest(candidate)?.0)
    }

    pub fn min_accuracy(&self) -> Option<f64> {
        self.members.iter().map(ArchiveMember::f_accuracy).min_by(f64::total_cmp)
    }

    /// Offers `candidate` to the archive.
    pub fn update(&mut self, candidate: T) -> Result<ArchiveEvent>
    where
        T: Clone,
    {
        if candidate.f_accuracy() == PENALTY {
            return Ok(ArchiveEvent::Ignored);
        }
        if self.policy == ArchivePolicy::KeepAll {
            if !self.ids.insert(candidate.id()) {
                return Ok(ArchiveEvent::Duplicate);
            }
            self.members.push(candidate);
            return Ok(ArchiveEvent::Added {
                slot: self.members.len() - 1,
                distance: None,
            });
        }
        let (distance, slot) = self.closest(&candidate)?;
        let Some(slot) = slot else {
            self.ids.insert(candidate.id());
            self.members.push(candidate);
            return Ok(ArchiveEvent::Added { slot: 0, distance: None });
        };
        if distance > self.t_diversity {
            self.ids.insert(candidate.id());
            self.members.push(candidate);
            return Ok(ArchiveEvent::Added {
                slot: self.members.len() - 1,
                distance: Some(distance),
            });
        }
        let closest = &self.members[slot];
        if closest.f_accuracy() > candidate.f_accuracy() {
            let (replaced_id, replaced_accuracy) = (closest.id(), closest.f_accuracy());
            self.ids.remove(&replaced_id);
            self.ids.insert(candidate.id());
            self.members[slot] = candidate;
            return Ok(ArchiveEvent::Replaced {
                slot,
                distance,
                replaced_id,
                replaced_accuracy,
            });
        }
        Ok(ArchiveEvent::Rejected { distance })
    }
}
