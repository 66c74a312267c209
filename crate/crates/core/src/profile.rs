//! Case-study profiles and their fixed class-id assignments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which environment a campaign tests: street scenes or Martian terrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Urban,
    Mars,
}

/// Class ids of the urban profile.
pub mod urban {
    pub const ROAD: u8 = 0;
    pub const CAR: u8 = 1;
    pub const BUILDING: u8 = 2;
    pub const SKY: u8 = 3;
    pub const TERRAIN: u8 = 4;
}

/// Class ids of the Mars profile.
pub mod mars {
    pub const SOIL: u8 = 0;
    pub const ROCK: u8 = 1;
    pub const SAND: u8 = 2;
    pub const BEDROCK: u8 = 3;
    pub const SKY: u8 = 4;
}

/// Version of the shipped class tables. Bump when an id assignment changes.
pub const CLASS_TABLE_VERSION: u32 = 1;

impl Profile {
    pub fn class_names(self) -> &'static [(u8, &'static str)] {
        match self {
            Profile::Urban => &[
                (urban::ROAD, "road"),
                (urban::CAR, "car"),
                (urban::BUILDING, "building"),
                (urban::SKY, "sky"),
                (urban::TERRAIN, "terrain"),
            ],
            Profile::Mars => &[
                (mars::SOIL, "soil"),
                (mars::ROCK, "rock"),
                (mars::SAND, "sand"),
                (mars::BEDROCK, "bedrock"),
                (mars::SKY, "sky"),
            ],
        }
    }

    pub fn class_ids(self) -> Vec<u8> {
        self.class_names().iter().map(|(id, _)| *id).collect()
    }

    /// Class whose ground-truth proportion decides relevance.
    pub fn default_gated_class(self) -> u8 {
        match self {
            Profile::Urban => urban::CAR,
            Profile::Mars => mars::SKY,
        }
    }

    pub fn default_proportion_hi(self) -> f64 {
        match self {
            Profile::Urban => 0.4,
            Profile::Mars => 0.7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Urban => "urban",
            Profile::Mars => "mars",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "urban" => Ok(Profile::Urban),
            "mars" => Ok(Profile::Mars),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}
