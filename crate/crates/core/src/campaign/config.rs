//! JSON campaign configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::{BackendBinding, Bounds, Ports};
use crate::error::{Error, Result};
use crate::features::DistanceMetric;
use crate::fitness::{calibrate, GateConfig, Thresholds, DEFAULT_CALIBRATION_SAMPLES};
use crate::raster::DEFAULT_SIZE;
use crate::search::SearchParams;
use crate::Profile;

/// Where a run's thresholds come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    /// Calibrate from `calibration_samples` fresh images before running.
    #[default]
    Calibrate,
    /// A thresholds file written by `calibrate`; relative paths resolve against the config file.
    File(PathBuf),
    Inline(Thresholds),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub profile: Profile,
    #[serde(default)]
    pub search: SearchParams,
    /// Profile defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<GateConfig>,
    /// Thresholds for feature-distance variants.
    #[serde(default)]
    pub thresholds: ThresholdSource,
    /// Thresholds for the pixel-distance variant.
    #[serde(default)]
    pub pixel_thresholds: ThresholdSource,
    #[serde(default)]
    pub backends: BackendBinding,
    /// Search space; the scene generator's own bounds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u64,
    #[serde(default = "default_output_root")]
    pub output_root: PathBuf,
    #[serde(default = "default_image_size")]
    pub image_size: u32,
    #[serde(default = "default_calibration_samples")]
    pub calibration_samples: usize,
    #[serde(default)]
    pub calibration_seed: u64,
    /// Worker threads (and external processes per backend); all processors when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_repetitions() -> u64 {
    10
}

fn default_output_root() -> PathBuf {
    PathBuf::from("campaign")
}

fn default_image_size() -> u32 {
    DEFAULT_SIZE
}

fn default_calibration_samples() -> usize {
    DEFAULT_CALIBRATION_SAMPLES
}

impl CampaignConfig {
    /// Defaults for `profile`.
    pub fn new(profile: Profile) -> Self {
        Self {
            profile,
            search: SearchParams::default(),
            gates: None,
            thresholds: ThresholdSource::Calibrate,
            pixel_thresholds: ThresholdSource::Calibrate,
            backends: BackendBinding::default(),
            bounds: None,
            repetitions: default_repetitions(),
            output_root: default_output_root(),
            image_size: default_image_size(),
            calibration_samples: default_calibration_samples(),
            calibration_seed: 0,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Loads a config file, resolving relative threshold paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for source in [&mut config.thresholds, &mut config.pixel_thresholds] {
            if let ThresholdSource::File(p) = source {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.gate_config().validate(self.profile)?;
        if self.image_size < 8 {
            return Err(Error::Config(format!("image size {} is too small", self.image_size)));
        }
        if self.calibration_samples < 2 {
            return Err(Error::Config("calibration needs at least 2 samples".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for (source, metric) in [
            (&self.thresholds, DistanceMetric::Feature),
            (&self.pixel_thresholds, DistanceMetric::Pixel),
        ] {
            if let ThresholdSource::Inline(t) = source {
                if t.profile != self.profile || t.metric != metric {
                    return Err(Error::Config(format!(
                        "inline thresholds for {} {} distance do not fit a {} campaign slot for {metric} distance",
                        t.profile, t.metric, self.profile
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn gate_config(&self) -> GateConfig {
        self.gates.unwrap_or_else(|| GateConfig::for_profile(self.profile))
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn ports(&self) -> Result<Ports> {
        Ports::from_binding(
            self.profile,
            self.image_size,
            self.bounds.clone(),
            &self.backends,
            self.workers(),
        )
    }

    /// Resolves the thresholds for `metric`, calibrating with `ports` if configured to.
    pub fn thresholds_for(&self, metric: DistanceMetric, ports: &Ports) -> Result<Thresholds> {
        let source = match metric {
            DistanceMetric::Feature => &self.thresholds,
            DistanceMetric::Pixel => &self.pixel_thresholds,
        };
        let t = match source {
            ThresholdSource::Calibrate => calibrate(
                self.calibration_samples,
                metric,
                ports,
                &self.gate_config(),
                self.calibration_seed,
            )?,
            ThresholdSource::File(p) => Thresholds::load(p)?,
            ThresholdSource::Inline(t) => *t,
        };
        if t.profile != self.profile || t.metric != metric {
            return Err(Error::Config(format!(
                "expected {} thresholds for {metric} distance, found {} / {}",
                self.profile, t.profile, t.metric
            )));
        }
        Ok(t)
    }
}
