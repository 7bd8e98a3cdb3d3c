//! Channel-parameter estimators, their analytic variance models and the
//! confidence bounds fed into the finite-size key rate.
//!
//! Three estimation schemes are supported:
//!
//! * **Single**: a fraction `r` of the states is sacrificed; their
//!   modulation is revealed and `T`, `V_eps` are estimated from those
//!   `m = r N` pairs.
//! * **Double**: every state carries a second, public modulation of variance
//!   `V_2`. All `N` states feed the estimate and the secret first modulation
//!   is treated as source noise.
//! * **ModifiedDouble**: as Double, but additionally the first modulation of
//!   `r N` states is revealed. The two sub-ensembles give independent
//!   estimates that are merged with the minimum-variance linear combination.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{
    aggregated_noise_variance, aggregated_noise_variance_double, ChannelParams, ModulationParams,
    SourceParams,
};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Single,
    Double,
    #[serde(alias = "modified")]
    ModifiedDouble,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [Self::Single, Self::Double, Self::ModifiedDouble];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Double => "double",
            Self::ModifiedDouble => "modified",
        }
    }

    pub fn uses_double_modulation(&self) -> bool {
        !matches!(self, Self::Single)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single" => Ok(Self::Single),
            "double" => Ok(Self::Double),
            "modified" | "modified_double" | "modified-double" => Ok(Self::ModifiedDouble),
            other => Err(format!("unknown scheme `{other}` (expected single, double or modified)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationScheme {
    pub kind: SchemeKind,
    pub ratio: f64,
}

impl EstimationScheme {
    pub fn new(kind: SchemeKind, ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(invalid("r", ratio, "must lie in [0, 1]"));
        }
        let ratio = if kind == SchemeKind::Double { 0.0 } else { ratio };
        Ok(Self { kind, ratio })
    }

    pub fn single(ratio: f64) -> Result<Self> {
        Self::new(SchemeKind::Single, ratio)
    }

    pub fn double() -> Self {
        Self {
            kind: SchemeKind::Double,
            ratio: 0.0,
        }
    }

    pub fn modified_double(ratio: f64) -> Result<Self> {
        Self::new(SchemeKind::ModifiedDouble, ratio)
    }

    fn check_modulation(&self, modulation: &ModulationParams) -> Result<()> {
        match (self.kind, modulation) {
            (SchemeKind::Single, ModulationParams::Single { .. }) => Ok(()),
            (SchemeKind::Single, _) => Err(Error::WrongScheme { expected: "single" }),
            (_, ModulationParams::Double { .. }) => Ok(()),
            (_, _) => Err(Error::WrongScheme { expected: "double" }),
        }
    }
}

/// Revealed modulation values `M_i` paired with Bob's outcomes `B_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    revealed: Vec<f64>,
    outcomes: Vec<f64>,
}

impl SampleSet {
    pub fn new(revealed: Vec<f64>, outcomes: Vec<f64>) -> Result<Self> {
        if revealed.len() != outcomes.len() {
            return Err(Error::SampleLengthMismatch {
                revealed: revealed.len(),
                outcomes: outcomes.len(),
            });
        }
        Ok(Self { revealed, outcomes })
    }

    pub fn len(&self) -> usize {
        self.revealed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revealed.is_empty()
    }

    pub fn revealed(&self) -> &[f64] {
        &self.revealed
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.revealed.iter().copied().zip(self.outcomes.iter().copied())
    }

    pub fn moments(&self) -> MomentSums {
        let mut sums = MomentSums::default();
        for (m, b) in self.pairs() {
            sums.push(m, b);
        }
        sums
    }
}

/// Running sums `(count, ΣM², ΣMB, ΣB²)`; sufficient for every estimator
/// below because the residual sum expands as
/// `Σ(B - √T M)² = ΣB² - 2√T ΣMB + T ΣM²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentSums {
    pub count: u64,
    pub sum_mm: f64,
    pub sum_mb: f64,
    pub sum_bb: f64,
}

impl MomentSums {
    #[inline]
    pub fn push(&mut self, m: f64, b: f64) {
        self.count += 1;
        self.sum_mm += m * m;
        self.sum_mb += m * b;
        self.sum_bb += b * b;
    }

    fn check(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptySample);
        }
        Ok(self.count as f64)
    }

    pub fn covariance(&self) -> Result<f64> {
        Ok(self.sum_mb / self.check()?)
    }

    pub fn transmittance(&self, known_variance: f64) -> Result<f64> {
        check_known_variance(known_variance)?;
        let c = self.covariance()?;
        Ok(c * c / (known_variance * known_variance))
    }

    /// Excess-noise estimate; `hidden_variance` is the variance of any
    /// unrevealed modulation riding on the same states (`V_1` for double
    /// modulation, 0 otherwise).
    pub fn excess_noise(&self, t_hat: f64, source: &SourceParams, hidden_variance: f64) -> Result<f64> {
        check_t_hat(t_hat)?;
        let m = self.check()?;
        let root = t_hat.sqrt();
        let residual = (self.sum_bb - 2.0 * root * self.sum_mb + t_hat * self.sum_mm) / m;
        Ok(residual + t_hat * (1.0 - source.squeezing - hidden_variance) - 1.0)
    }
}

fn check_known_variance(v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid("V", v, "known modulation variance must be > 0"));
    }
    Ok(())
}

fn check_t_hat(t_hat: f64) -> Result<()> {
    if !(t_hat >= 0.0) || !t_hat.is_finite() {
        return Err(invalid("T_hat", t_hat, "must be finite and >= 0"));
    }
    Ok(())
}

/// `Ĉ_MB = (1/m) Σ M_i B_i`.
pub fn estimate_covariance(samples: &SampleSet) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let sum: f64 = samples.pairs().map(|(m, b)| m * b).sum();
    Ok(sum / samples.len() as f64)
}

/// `T̂ = Ĉ_MB² / V²`. For double modulation pass `V_2`.
pub fn estimate_transmittance(samples: &SampleSet, known_variance: f64) -> Result<f64> {
    check_known_variance(known_variance)?;
    let c = estimate_covariance(samples)?;
    Ok(c * c / (known_variance * known_variance))
}

/// `V̂_eps = (1/m) Σ (B_i - √T̂ M_i)² + T̂ (1 - V_S) - 1`, returned unclamped.
pub fn estimate_excess_noise(samples: &SampleSet, t_hat: f64, source: &SourceParams) -> Result<f64> {
    estimate_excess_noise_hidden(samples, t_hat, source, 0.0)
}

/// Excess-noise estimator when a secret modulation of variance
/// `hidden_variance` is folded into the noise (double modulation).
pub fn estimate_excess_noise_hidden(
    samples: &SampleSet,
    t_hat: f64,
    source: &SourceParams,
    hidden_variance: f64,
) -> Result<f64> {
    check_t_hat(t_hat)?;
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let root = t_hat.sqrt();
    let residual: f64 = samples
        .pairs()
        .map(|(m, b)| {
            let e = b - root * m;
            e * e
        })
        .sum::<f64>()
        / samples.len() as f64;
    Ok(residual + t_hat * (1.0 - source.squeezing - hidden_variance) - 1.0)
}

/// Analytic variances of the transmittance (`sigma_sq`) and excess-noise
/// (`s_sq`) estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceModel {
    pub sigma_sq: f64,
    pub s_sq: f64,
}

impl VarianceModel {
    pub fn zero() -> Self {
        Self {
            sigma_sq: 0.0,
            s_sq: 0.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn s(&self) -> f64 {
        self.s_sq.sqrt()
    }
}

/// `(4/m) T² (2 + V_N / (T V))`, written so that it stays finite at `T = 0`.
fn transmittance_variance(t: f64, noise: f64, known_variance: f64, count: f64) -> f64 {
    4.0 / count * (2.0 * t * t + t * noise / known_variance)
}

fn check_count(name: &'static str, count: f64) -> Result<()> {
    if !(count >= 1.0) || !count.is_finite() {
        return Err(invalid(name, count, "needs at least one state"));
    }
    Ok(())
}

/// Single modulation, `m` revealed states of modulation variance `V`.
pub fn variance_single(
    channel: &ChannelParams,
    source: &SourceParams,
    variance: f64,
    m: f64,
) -> Result<VarianceModel> {
    check_count("m", m)?;
    if !(variance > 0.0) {
        return Err(invalid("V", variance, "must be > 0"));
    }
    let t = channel.transmittance;
    if !(t > 0.0) {
        return Err(invalid("T", t, "variance model undefined without signal"));
    }
    let noise = aggregated_noise_variance(channel, source);
    let sigma_sq = transmittance_variance(t, noise, variance, m);
    let leak = 1.0 - source.squeezing;
    Ok(VarianceModel {
        sigma_sq,
        s_sq: 2.0 / m * noise * noise + leak * leak * sigma_sq,
    })
}

/// Double modulation: all `N` states, second modulation `V_2` revealed.
pub fn variance_double(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
    total: f64,
) -> Result<VarianceModel> {
    check_count("N", total)?;
    let ModulationParams::Double {
        key_variance,
        revealed_variance,
    } = *modulation
    else {
        return Err(Error::WrongScheme { expected: "double" });
    };
    if !(revealed_variance > 0.0) {
        return Err(invalid("V_2", revealed_variance, "must be > 0"));
    }
    let noise = aggregated_noise_variance_double(channel, source, modulation)?;
    let sigma_sq = transmittance_variance(channel.transmittance, noise, revealed_variance, total);
    let leak = key_variance + source.squeezing - 1.0;
    Ok(VarianceModel {
        sigma_sq,
        s_sq: 2.0 / total * noise * noise + leak * leak * sigma_sq,
    })
}

/// Variance of the best linear combination of two independent unbiased
/// estimators with variances `w1`, `w2`.
pub fn opt_combine(w1: f64, w2: f64) -> Result<f64> {
    if !(w1 > 0.0) {
        return Err(invalid("W1", w1, "must be > 0"));
    }
    if !(w2 > 0.0) {
        return Err(invalid("W2", w2, "must be > 0"));
    }
    Ok(1.0 / (1.0 / w1 + 1.0 / w2))
}

/// Weight given to the first estimator in the optimal combination.
pub fn opt_weight(w1: f64, w2: f64) -> f64 {
    w2 / (w1 + w2)
}

/// Constituents of the modified double-modulation variance model.
///
/// `hidden` refers to the `(1 - r) N` states whose first modulation stays
/// secret, `revealed` to the `r N` states with both modulations public.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedDoubleParts {
    pub sigma_sq_hidden: f64,
    pub sigma_sq_revealed: f64,
    pub s_sq_hidden: f64,
    pub s_sq_revealed: f64,
    pub combined: VarianceModel,
}

impl ModifiedDoubleParts {
    /// Weight of the hidden-subset estimate of `T`.
    pub fn t_weight_hidden(&self) -> f64 {
        opt_weight(self.sigma_sq_hidden, self.sigma_sq_revealed)
    }

    /// Weight of the hidden-subset estimate of `V_eps`.
    pub fn veps_weight_hidden(&self) -> f64 {
        opt_weight(self.s_sq_hidden, self.s_sq_revealed)
    }
}

pub fn modified_double_parts(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
    total: f64,
    ratio: f64,
) -> Result<ModifiedDoubleParts> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid("r", ratio, "sub-ensemble split needs 0 < r < 1"));
    }
    check_count("N", total)?;
    let ModulationParams::Double {
        key_variance,
        revealed_variance,
    } = *modulation
    else {
        return Err(Error::WrongScheme { expected: "double" });
    };
    let t = channel.transmittance;
    if !(t > 0.0) {
        return Err(invalid("T", t, "variance model undefined without signal"));
    }
    let hidden_count = (1.0 - ratio) * total;
    let revealed_count = ratio * total;
    let noise_star = aggregated_noise_variance_double(channel, source, modulation)?;
    let noise = aggregated_noise_variance(channel, source);

    let sigma_sq_hidden = transmittance_variance(t, noise_star, revealed_variance, hidden_count);
    let sigma_sq_revealed =
        transmittance_variance(t, noise, key_variance + revealed_variance, revealed_count);
    let sigma_sq = opt_combine(sigma_sq_hidden, sigma_sq_revealed)?;

    let leak_hidden = 1.0 - source.squeezing - key_variance;
    let leak_revealed = 1.0 - source.squeezing;
    let s_sq_hidden = 2.0 / hidden_count * noise_star * noise_star + leak_hidden * leak_hidden * sigma_sq;
    let s_sq_revealed = 2.0 / revealed_count * noise * noise + leak_revealed * leak_revealed * sigma_sq;
    Ok(ModifiedDoubleParts {
        sigma_sq_hidden,
        sigma_sq_revealed,
        s_sq_hidden,
        s_sq_revealed,
        combined: VarianceModel {
            sigma_sq,
            s_sq: opt_combine(s_sq_hidden, s_sq_revealed)?,
        },
    })
}

/// Modified double modulation. The endpoints delegate: `r = 0` is plain
/// double modulation, `r = 1` is single modulation with `V = V_1 + V_2`.
pub fn variance_modified_double(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
    total: f64,
    ratio: f64,
) -> Result<VarianceModel> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(invalid("r", ratio, "must lie in [0, 1]"));
    }
    let ModulationParams::Double {
        key_variance,
        revealed_variance,
    } = *modulation
    else {
        return Err(Error::WrongScheme { expected: "double" });
    };
    if ratio == 0.0 {
        return variance_double(channel, source, modulation, total);
    }
    if ratio == 1.0 {
        return variance_single(channel, source, key_variance + revealed_variance, total);
    }
    Ok(modified_double_parts(channel, source, modulation, total, ratio)?.combined)
}

/// Variance model of `scheme` at the given point. `total` is the block size.
pub fn scheme_variance(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
    scheme: &EstimationScheme,
    total: f64,
) -> Result<VarianceModel> {
    scheme.check_modulation(modulation)?;
    match scheme.kind {
        SchemeKind::Single => variance_single(channel, source, modulation.key_variance(), scheme.ratio * total),
        SchemeKind::Double => variance_double(channel, source, modulation, total),
        SchemeKind::ModifiedDouble => {
            variance_modified_double(channel, source, modulation, total, scheme.ratio)
        }
    }
}

/// `z = Φ⁻¹(1 - δ/2)`.
pub fn confidence_coefficient(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", delta, "must lie in (0, 1)"));
    }
    normal::upper_quantile(delta / 2.0)
}

/// Symmetric confidence box around the point estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBounds {
    pub t_hat: f64,
    pub veps_hat: f64,
    /// `max(0, T̂ - z σ)`.
    pub t_low: f64,
    pub veps_up: f64,
    pub t_halfwidth: f64,
    pub veps_halfwidth: f64,
    pub z: f64,
    pub delta: f64,
}

impl ConfidenceBounds {
    /// A zero-width box at the true parameters.
    pub fn exact(channel: &ChannelParams) -> Self {
        Self {
            t_hat: channel.transmittance,
            veps_hat: channel.excess_noise,
            t_low: channel.transmittance,
            veps_up: channel.excess_noise,
            t_halfwidth: 0.0,
            veps_halfwidth: 0.0,
            z: 0.0,
            delta: 1.0,
        }
    }

    pub fn t_up(&self) -> f64 {
        self.t_hat + self.t_halfwidth
    }

    pub fn veps_low(&self) -> f64 {
        self.veps_hat - self.veps_halfwidth
    }
}

pub fn confidence_bounds(
    t_hat: f64,
    veps_hat: f64,
    model: &VarianceModel,
    delta: f64,
) -> Result<ConfidenceBounds> {
    let z = confidence_coefficient(delta)?;
    Ok(confidence_bounds_with_z(t_hat, veps_hat, model, z, delta))
}

/// Bounds for an explicitly chosen confidence coefficient `z`.
pub fn confidence_bounds_with_z(
    t_hat: f64,
    veps_hat: f64,
    model: &VarianceModel,
    z: f64,
    delta: f64,
) -> ConfidenceBounds {
    let t_halfwidth = z * model.sigma();
    let veps_halfwidth = z * model.s();
    ConfidenceBounds {
        t_hat,
        veps_hat,
        t_low: (t_hat - t_halfwidth).max(0.0),
        veps_up: veps_hat + veps_halfwidth,
        t_halfwidth,
        veps_halfwidth,
        z,
        delta,
    }
}

/// Planning-mode bounds: the true parameters shifted by `z` times the
/// scheme's analytic standard deviations.
pub fn expected_bounds(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
    scheme: &EstimationScheme,
    total: f64,
    delta: f64,
) -> Result<ConfidenceBounds> {
    let model = scheme_variance(channel, source, modulation, scheme, total)?;
    confidence_bounds(channel.transmittance, channel.excess_noise, &model, delta)
}
