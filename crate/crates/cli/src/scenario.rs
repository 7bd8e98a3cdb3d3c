//! Scenario files: what to sweep or simulate, and with which parameters.

use std::fmt;
use std::path::Path;

use cvqkd_core::estimation::SchemeKind;
use cvqkd_core::model::{FiberModel, DEFAULT_BETA, DEFAULT_DELTA, DEFAULT_DELTA_STAR};
use cvqkd_core::search::{linear_grid, log_grid};
use cvqkd_core::secrecy::CornerMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "d")]
    Distance,
    #[serde(rename = "T")]
    Transmittance,
    #[serde(rename = "N")]
    BlockSize,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Distance => "d",
            Axis::Transmittance => "T",
            Axis::BlockSize => "N",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: Axis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Linear => linear_grid(self.min, self.max, self.points),
            Spacing::Log => log_grid(self.min, self.max, self.points),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.points < 2 {
            return Err(format!("sweep needs at least 2 points, got {}", self.points));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(format!("sweep range [{}, {}] is not a finite interval", self.min, self.max));
        }
        if self.spacing == Spacing::Log && !(self.min > 0.0) {
            return Err("log spacing needs a positive lower end".into());
        }
        Ok(())
    }
}

fn default_block_size() -> f64 {
    1e6
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_delta_star() -> f64 {
    DEFAULT_DELTA_STAR
}
fn default_revealed_variance() -> f64 {
    cvqkd_core::optimizer::DEFAULT_REVEALED_VARIANCE
}
fn default_sources() -> Vec<f64> {
    vec![1.0, 0.5, 0.1]
}
fn default_schemes() -> Vec<SchemeKind> {
    vec![SchemeKind::Single, SchemeKind::ModifiedDouble]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSettings {
    #[serde(default = "default_block_size")]
    pub block_size: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_delta_star")]
    pub delta_star: f64,
    /// `V_2` for the double-modulation schemes.
    #[serde(default = "default_revealed_variance")]
    pub revealed_variance: f64,
    #[serde(default)]
    pub corner: CornerMode,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            block_size: default_block_size(),
            beta: default_beta(),
            delta: default_delta(),
            delta_star: default_delta_star(),
            revealed_variance: default_revealed_variance(),
            corner: CornerMode::default(),
        }
    }
}

/// Link used when the sweep axis is the block size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedLink {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmittance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub block_size: usize,
    pub ratio: f64,
    /// `V` for single modulation, `V_1` for double modulation.
    pub key_variance: f64,
    pub revealed_variance: f64,
    pub squeezing: f64,
    pub trials: usize,
    /// Transmittance grid.
    pub grid: SweepAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub fiber: FiberModel,
    #[serde(default)]
    pub protocol: ProtocolSettings,
    #[serde(default = "default_sources")]
    pub sources: Vec<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
    #[serde(default)]
    pub fixed: FixedLink,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSettings>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
        // a run manifest carries the scenario it was produced from
        let value = match value.get("scenario") {
            Some(inner) if inner.is_object() => inner.clone(),
            _ => value,
        };
        let scenario: Scenario = serde_json::from_value(value).map_err(|e| format!("invalid scenario: {e}"))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(format!("scenario name `{}` must be non-empty [A-Za-z0-9_-]", self.name));
        }
        FiberModel::new(self.fiber.attenuation, self.fiber.eps_ratio).map_err(|e| e.to_string())?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
            if sweep.variable == Axis::BlockSize && self.fixed.transmittance.is_none() && self.fixed.distance.is_none() {
                return Err("a block-size sweep needs fixed.transmittance or fixed.distance".into());
            }
        }
        if self.fixed.transmittance.is_some() && self.fixed.distance.is_some() {
            return Err("fixed.transmittance and fixed.distance are mutually exclusive".into());
        }
        if let Some(mc) = &self.montecarlo {
            mc.grid.validate()?;
            if mc.grid.variable != Axis::Transmittance {
                return Err("the Monte Carlo grid runs over T".into());
            }
            if mc.trials < 2 {
                return Err("Monte Carlo needs at least 2 trials".into());
            }
        }
        if self.sweep.is_none() && self.montecarlo.is_none() {
            return Err("scenario has neither a sweep nor a montecarlo section".into());
        }
        if self.sources.iter().any(|&v| !(v > 0.0)) {
            return Err("source squeezing values must be > 0".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serialises");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

pub struct Preset {
    pub name: &'static str,
    pub json: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig3",
        json: include_str!("../presets/fig3.json"),
    },
    Preset {
        name: "fig4_long",
        json: include_str!("../presets/fig4_long.json"),
    },
    Preset {
        name: "fig4_short",
        json: include_str!("../presets/fig4_short.json"),
    },
    Preset {
        name: "fig5",
        json: include_str!("../presets/fig5.json"),
    },
    Preset {
        name: "fig6",
        json: include_str!("../presets/fig6.json"),
    },
    Preset {
        name: "fig7",
        json: include_str!("../presets/fig7.json"),
    },
    Preset {
        name: "fig8",
        json: include_str!("../presets/fig8.json"),
    },
    Preset {
        name: "fig9",
        json: include_str!("../presets/fig9.json"),
    },
];

pub fn preset(name: &str) -> Result<Scenario, String> {
    let p = PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            format!("unknown preset `{name}` (available: {})", names.join(", "))
        })?;
    Scenario::from_json(p.json)
}
