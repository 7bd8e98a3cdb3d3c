//! Physical model of the prepare-and-measure link.
//!
//! All variances are in shot-noise units (vacuum quadrature variance = 1).
//! Bob's homodyne outcome is modelled as
//!
//! ```text
//! x_B = sqrt(T) (x_S + x_M) + sqrt(1 - T) x_0 + x_eps
//! ```
//!
//! where only the modulation `x_M` is known to the trusted parties, so the
//! remaining terms collapse into one aggregated Gaussian noise of variance
//! `V_N = 1 + V_eps + T (V_S - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{EstimationScheme, SchemeKind};

/// Transmittance and excess noise of the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub transmittance: f64,
    pub excess_noise: f64,
}

impl ChannelParams {
    pub fn new(transmittance: f64, excess_noise: f64) -> Result<Self> {
        let channel = Self {
            transmittance,
            excess_noise,
        };
        channel.validate()?;
        Ok(channel)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.transmittance) {
            return Err(invalid("T", self.transmittance, "must lie in [0, 1]"));
        }
        if !(self.excess_noise >= 0.0) || !self.excess_noise.is_finite() {
            return Err(invalid("V_eps", self.excess_noise, "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Squeezed-quadrature variance of the resource state.
///
/// `V_S = 1` is a coherent state, `V_S < 1` a squeezed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub squeezing: f64,
}

impl SourceParams {
    pub fn new(squeezing: f64) -> Result<Self> {
        if !(squeezing > 0.0) || !squeezing.is_finite() {
            return Err(invalid("V_S", squeezing, "must be finite and > 0"));
        }
        Ok(Self { squeezing })
    }

    pub fn coherent() -> Self {
        Self { squeezing: 1.0 }
    }

    pub fn is_coherent(&self) -> bool {
        self.squeezing >= 1.0
    }

    /// Squeezing expressed in dB below shot noise.
    pub fn squeezing_db(&self) -> f64 {
        -10.0 * self.squeezing.log10()
    }
}

/// Alice's Gaussian modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ModulationParams {
    /// One displacement of variance `variance`; revealed on the estimation subset.
    Single { variance: f64 },
    /// Two independent displacements: `key_variance` stays secret and
    /// carries the key, `revealed_variance` is published for estimation.
    Double {
        key_variance: f64,
        revealed_variance: f64,
    },
}

impl ModulationParams {
    pub fn single(variance: f64) -> Self {
        Self::Single { variance }
    }

    pub fn double(key_variance: f64, revealed_variance: f64) -> Self {
        Self::Double {
            key_variance,
            revealed_variance,
        }
    }

    /// Variance of the modulation that carries the key (`V` or `V_1`).
    pub fn key_variance(&self) -> f64 {
        match *self {
            Self::Single { variance } => variance,
            Self::Double { key_variance, .. } => key_variance,
        }
    }

    pub fn is_double(&self) -> bool {
        matches!(self, Self::Double { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Single { variance } => {
                if !(variance >= 0.0) || !variance.is_finite() {
                    return Err(invalid("V", variance, "must be finite and >= 0"));
                }
            }
            Self::Double {
                key_variance,
                revealed_variance,
            } => {
                if !(key_variance >= 0.0) || !key_variance.is_finite() {
                    return Err(invalid("V_1", key_variance, "must be finite and >= 0"));
                }
                if !(revealed_variance > 0.0) || !revealed_variance.is_finite() {
                    return Err(invalid("V_2", revealed_variance, "must be finite and > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Everything the trusted parties choose or are handed, apart from the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub source: SourceParams,
    pub modulation: ModulationParams,
    /// Block size `N`.
    pub block_size: f64,
    /// Disclosure ratio `r`.
    pub ratio: f64,
    /// Reconciliation efficiency.
    pub beta: f64,
    /// Channel-estimation error probability.
    pub delta: f64,
    /// Privacy-amplification error probability.
    pub delta_star: f64,
}

/// Default `delta`: `delta / 2 = 1e-10`.
pub const DEFAULT_DELTA: f64 = 2e-10;
pub const DEFAULT_DELTA_STAR: f64 = 1e-10;
pub const DEFAULT_BETA: f64 = 0.95;

impl ProtocolParams {
    pub fn new(
        source: SourceParams,
        modulation: ModulationParams,
        block_size: f64,
        ratio: f64,
    ) -> Result<Self> {
        let params = Self {
            source,
            modulation,
            block_size,
            ratio,
            beta: DEFAULT_BETA,
            delta: DEFAULT_DELTA,
            delta_star: DEFAULT_DELTA_STAR,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_errors(mut self, delta: f64, delta_star: f64) -> Self {
        self.delta = delta;
        self.delta_star = delta_star;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation.validate()?;
        if !(self.block_size >= 2.0) || !self.block_size.is_finite() {
            return Err(invalid("N", self.block_size, "must be a finite count >= 2"));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(invalid("r", self.ratio, "must lie in [0, 1]"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", self.beta, "must lie in (0, 1]"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", self.delta, "must lie in (0, 1)"));
        }
        if !(self.delta_star > 0.0 && self.delta_star < 1.0) {
            return Err(invalid("delta*", self.delta_star, "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Estimation scheme implied by the modulation and the disclosure ratio:
    /// double modulation with `r = 0` is the plain double-modulation scheme.
    pub fn scheme(&self) -> EstimationScheme {
        let kind = match self.modulation {
            ModulationParams::Single { .. } => SchemeKind::Single,
            ModulationParams::Double { .. } if self.ratio == 0.0 => SchemeKind::Double,
            ModulationParams::Double { .. } => SchemeKind::ModifiedDouble,
        };
        EstimationScheme {
            kind,
            ratio: self.ratio,
        }
    }

    /// States used for estimation (`m`) and for key extraction (`n`).
    pub fn state_counts(&self) -> (f64, f64) {
        let total = self.block_size;
        match self.modulation {
            ModulationParams::Single { .. } => {
                let m = self.ratio * total;
                (total - m, m)
            }
            // every state feeds estimation through the revealed second
            // modulation; the r N fully revealed ones are lost for the key
            ModulationParams::Double { .. } => ((1.0 - self.ratio) * total, total),
        }
    }
}

/// Optical fiber: attenuation and excess noise proportional to transmittance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberModel {
    /// Loss in dB/km.
    pub attenuation: f64,
    /// Excess-noise-to-transmittance ratio.
    pub eps_ratio: f64,
}

impl Default for FiberModel {
    fn default() -> Self {
        Self {
            attenuation: 0.2,
            eps_ratio: 0.01,
        }
    }
}

impl FiberModel {
    pub fn new(attenuation: f64, eps_ratio: f64) -> Result<Self> {
        if !(attenuation > 0.0) || !attenuation.is_finite() {
            return Err(invalid("attenuation", attenuation, "must be finite and > 0"));
        }
        if !(eps_ratio >= 0.0) || !eps_ratio.is_finite() {
            return Err(invalid("eps", eps_ratio, "must be finite and >= 0"));
        }
        Ok(Self {
            attenuation,
            eps_ratio,
        })
    }

    pub fn with_eps_ratio(mut self, eps_ratio: f64) -> Self {
        self.eps_ratio = eps_ratio;
        self
    }

    pub fn transmittance(&self, distance_km: f64) -> Result<f64> {
        distance_to_transmittance(distance_km, self)
    }

    pub fn distance(&self, transmittance: f64) -> Result<f64> {
        transmittance_to_distance(transmittance, self)
    }

    /// Channel at transmittance `T` with `V_eps = T * eps`.
    pub fn channel_at_transmittance(&self, transmittance: f64) -> Result<ChannelParams> {
        ChannelParams::new(transmittance, excess_noise_from_fiber(transmittance, self)?)
    }

    pub fn channel_at_distance(&self, distance_km: f64) -> Result<ChannelParams> {
        self.channel_at_transmittance(self.transmittance(distance_km)?)
    }
}

/// `V_N = 1 + V_eps + T (V_S - 1)`.
pub fn aggregated_noise_variance(channel: &ChannelParams, source: &SourceParams) -> f64 {
    1.0 + channel.excess_noise + channel.transmittance * (source.squeezing - 1.0)
}

/// `V_N* = 1 + V_eps + T (V_1 + V_S - 1)`: the secret first modulation
/// acts as extra source noise when only the second one is revealed.
pub fn aggregated_noise_variance_double(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
) -> Result<f64> {
    match *modulation {
        ModulationParams::Double { key_variance, .. } => Ok(1.0
            + channel.excess_noise
            + channel.transmittance * (key_variance + source.squeezing - 1.0)),
        ModulationParams::Single { .. } => Err(Error::WrongScheme { expected: "double" }),
    }
}

/// `T = 10^(-a d / 10)` for attenuation `a` in dB/km.
pub fn distance_to_transmittance(distance_km: f64, fiber: &FiberModel) -> Result<f64> {
    if !(distance_km >= 0.0) || !distance_km.is_finite() {
        return Err(invalid("d", distance_km, "must be finite and >= 0"));
    }
    Ok(10f64.powf(-fiber.attenuation * distance_km / 10.0))
}

pub fn transmittance_to_distance(transmittance: f64, fiber: &FiberModel) -> Result<f64> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(invalid("T", transmittance, "must lie in (0, 1]"));
    }
    // -0.0 for T = 1
    Ok((-10.0 * transmittance.log10() / fiber.attenuation).max(0.0))
}

pub fn excess_noise_from_fiber(transmittance: f64, fiber: &FiberModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(invalid("T", transmittance, "must lie in [0, 1]"));
    }
    Ok(transmittance * fiber.eps_ratio)
}
