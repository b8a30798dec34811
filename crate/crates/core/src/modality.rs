use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Sensor domain of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "V")]
    Visible,
    #[serde(rename = "T")]
    Thermal,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::Visible, Modality::Thermal];

    pub fn tag(self) -> char {
        match self {
            Modality::Visible => 'V',
            Modality::Thermal => 'T',
        }
    }

    pub fn other(self) -> Modality {
        match self {
            Modality::Visible => Modality::Thermal,
            Modality::Thermal => Modality::Visible,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Visible => "visible",
            Modality::Thermal => "thermal",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "V" | "v" | "visible" => Ok(Modality::Visible),
            "T" | "t" | "thermal" => Ok(Modality::Thermal),
            other => Err(Error::InvalidConfig(format!("unknown modality tag {other:?}"))),
        }
    }
}
