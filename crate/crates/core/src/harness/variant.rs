use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::map::MapLayout;
use crate::planner::{EpisodeConfig, GainMode, ViewSampler};
use crate::Error;

/// Planner configurations compared in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "FVP")]
    Fvp,
    #[serde(rename = "NAG-FVP")]
    NagFvp,
    #[serde(rename = "SM-FVP-LR")]
    SmFvpLr,
    #[serde(rename = "SM-FVP-HR")]
    SmFvpHr,
    #[serde(rename = "RVP-LR-like")]
    RvpLrLike,
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "EDS")]
    Eds,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Fvp,
        Variant::NagFvp,
        Variant::SmFvpLr,
        Variant::SmFvpHr,
        Variant::RvpLrLike,
        Variant::Rs,
        Variant::Eds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fvp => "FVP",
            Variant::NagFvp => "NAG-FVP",
            Variant::SmFvpLr => "SM-FVP-LR",
            Variant::SmFvpHr => "SM-FVP-HR",
            Variant::RvpLrLike => "RVP-LR-like",
            Variant::Rs => "RS",
            Variant::Eds => "EDS",
        }
    }

    /// Map layout, gain and sampler of this variant.
    pub fn settings(self) -> (MapLayout, GainMode, ViewSampler) {
        use GainMode::*;
        use MapLayout::*;
        use ViewSampler::*;
        match self {
            Variant::Fvp => (Dual, Attention, Frontier),
            Variant::NagFvp => (Dual, Unobserved, Frontier),
            Variant::SmFvpLr => (SingleCoarse, Attention, Frontier),
            Variant::SmFvpHr => (SingleFine, Attention, Frontier),
            Variant::RvpLrLike => (SingleCoarse, Unobserved, Frontier),
            Variant::Rs => (Dual, Attention, Random),
            Variant::Eds => (Dual, Attention, Even),
        }
    }

    /// `base` with this variant's switches applied.
    pub fn configure(self, base: &EpisodeConfig) -> EpisodeConfig {
        let (layout, gain, sampler) = self.settings();
        let mut cfg = base.clone();
        cfg.map.layout = layout;
        cfg.planner.gain = gain;
        cfg.planner.sampler = sampler;
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown planner variant `{s}`")))
    }
}
