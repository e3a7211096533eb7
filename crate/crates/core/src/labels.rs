use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth of the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Melanoma,
    Nevus,
}

impl BinaryLabel {
    pub fn is_positive(self) -> bool {
        self == BinaryLabel::Melanoma
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Melanoma => "melanoma",
            BinaryLabel::Nevus => "nevus",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinaryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "melanoma" => Ok(BinaryLabel::Melanoma),
            "nevus" => Ok(BinaryLabel::Nevus),
            other => Err(Error::InvalidInput(format!(
                "label must be melanoma or nevus, got {other:?}"
            ))),
        }
    }
}

/// Three-way histological diagnosis carried by cohort manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Melanoma,
    InSitu,
    Nevus,
}

/// How in-situ melanomas enter the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InSituPolicy {
    #[default]
    AsMelanoma,
    AsNevus,
    Exclude,
}

impl Diagnosis {
    pub fn to_binary(self, policy: InSituPolicy) -> Option<BinaryLabel> {
        match (self, policy) {
            (Diagnosis::Melanoma, _) => Some(BinaryLabel::Melanoma),
            (Diagnosis::Nevus, _) => Some(BinaryLabel::Nevus),
            (Diagnosis::InSitu, InSituPolicy::AsMelanoma) => Some(BinaryLabel::Melanoma),
            (Diagnosis::InSitu, InSituPolicy::AsNevus) => Some(BinaryLabel::Nevus),
            (Diagnosis::InSitu, InSituPolicy::Exclude) => None,
        }
    }
}
