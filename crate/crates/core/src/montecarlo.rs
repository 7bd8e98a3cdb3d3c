//! Monte Carlo simulation of the link and empirical estimator statistics.
//!
//! Every trial draws from its own ChaCha8 stream, keyed by the run seed and
//! selected by the trial index, so results do not depend on how trials are
//! spread over threads. Trials are reduced in index order.
//!
//! Two samplers are provided. [`simulate_transmission`] draws every physical
//! component of every state. [`run_trials`] only draws what the estimators
//! see: the revealed modulation and one aggregated Gaussian noise per state,
//! which has the same joint distribution and is several times cheaper.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{
    modified_double_parts, scheme_variance, EstimationScheme, MomentSums, SampleSet, SchemeKind,
    VarianceModel,
};
use crate::model::{
    aggregated_noise_variance, aggregated_noise_variance_double, ChannelParams, FiberModel,
    ModulationParams, SourceParams,
};
use crate::secrecy::veps_theoretical;

const TRANSMISSION_LABEL: u64 = 0x7472_616e_736d_6974;
const SUBSET_LABEL: u64 = 0x7375_6273_6574_0000;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent 64-bit seed from a parent seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

fn stream_rng(seed: u64, label: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label));
    rng.set_stream(index);
    rng
}

#[inline]
fn gauss<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub channel: ChannelParams,
    pub source: SourceParams,
    pub modulation: ModulationParams,
    pub scheme: EstimationScheme,
    /// States per trial.
    pub block_size: usize,
    pub trials: usize,
    pub seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if !(self.source.squeezing > 0.0) {
            return Err(invalid("V_S", self.source.squeezing, "must be > 0"));
        }
        self.modulation.validate()?;
        match (self.scheme.kind, self.modulation) {
            (SchemeKind::Single, ModulationParams::Single { .. }) => {}
            (SchemeKind::Single, _) => return Err(Error::WrongScheme { expected: "single" }),
            (_, ModulationParams::Double { .. }) => {}
            (_, _) => return Err(Error::WrongScheme { expected: "double" }),
        }
        if self.block_size < 2 {
            return Err(invalid("N", self.block_size as f64, "needs at least two states"));
        }
        if self.trials < 1 {
            return Err(invalid("trials", self.trials as f64, "needs at least one trial"));
        }
        Ok(())
    }

    /// Number of states whose (first) modulation is published.
    pub fn revealed_count(&self) -> usize {
        (self.scheme.ratio * self.block_size as f64).round() as usize
    }

    /// `m` for the single scheme, `N` otherwise.
    pub fn estimation_count(&self) -> usize {
        match self.scheme.kind {
            SchemeKind::Single => self.revealed_count(),
            _ => self.block_size,
        }
    }

    /// Analytic variance model of this configuration's estimators.
    pub fn analytic(&self) -> Result<VarianceModel> {
        scheme_variance(
            &self.channel,
            &self.source,
            &self.modulation,
            &self.scheme,
            self.block_size as f64,
        )
    }
}

/// One simulated block with every modulation record kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    /// First (key) modulation `M1`.
    pub key_modulation: Vec<f64>,
    /// Second (public) modulation `M2`; all zero for single modulation.
    pub revealed_modulation: Vec<f64>,
    pub outcomes: Vec<f64>,
    /// Indices whose first modulation is published, in draw order.
    pub revealed_indices: Vec<usize>,
}

impl Transmission {
    fn revealed_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.outcomes.len()];
        for &i in &self.revealed_indices {
            mask[i] = true;
        }
        mask
    }

    /// Pairs seen by the estimator of `kind`: revealed `M1` for single
    /// modulation, `M2` on every state for double modulation, and for the
    /// modified scheme `M2` on the hidden subset.
    pub fn estimation_samples(&self, kind: SchemeKind) -> Result<SampleSet> {
        let (m, b): (Vec<f64>, Vec<f64>) = match kind {
            SchemeKind::Single => self
                .revealed_indices
                .iter()
                .map(|&i| (self.key_modulation[i], self.outcomes[i]))
                .unzip(),
            SchemeKind::Double => (self.revealed_modulation.clone(), self.outcomes.clone()),
            SchemeKind::ModifiedDouble => {
                let mask = self.revealed_mask();
                (0..self.outcomes.len())
                    .filter(|&i| !mask[i])
                    .map(|i| (self.revealed_modulation[i], self.outcomes[i]))
                    .unzip()
            }
        };
        SampleSet::new(m, b)
    }

    /// Fully revealed states of the modified scheme: `(M1 + M2, B)`.
    pub fn fully_revealed_samples(&self) -> Result<SampleSet> {
        let (m, b) = self
            .revealed_indices
            .iter()
            .map(|&i| (self.key_modulation[i] + self.revealed_modulation[i], self.outcomes[i]))
            .unzip();
        SampleSet::new(m, b)
    }
}

/// Draw one block state by state:
/// `B = sqrt(T) (S + M1 + M2) + sqrt(1 - T) Z + E`.
///
/// The published subset is the first `round(r N)` entries of a seeded
/// Fisher-Yates shuffle of the indices.
pub fn simulate_transmission(config: &TrialConfig, trial_index: u64) -> Result<Transmission> {
    config.validate()?;
    let n = config.block_size;
    let (v1, v2) = match config.modulation {
        ModulationParams::Single { variance } => (variance, 0.0),
        ModulationParams::Double {
            key_variance,
            revealed_variance,
        } => (key_variance, revealed_variance),
    };
    let t = config.channel.transmittance;
    let (sd_s, sd_1, sd_2) = (config.source.squeezing.sqrt(), v1.sqrt(), v2.sqrt());
    let (root_t, root_loss) = (t.sqrt(), (1.0 - t).sqrt());
    let sd_e = config.channel.excess_noise.sqrt();

    let mut rng = stream_rng(config.seed, TRANSMISSION_LABEL, trial_index);
    let mut key_modulation = Vec::with_capacity(n);
    let mut revealed_modulation = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let s = gauss(&mut rng, sd_s);
        let m1 = gauss(&mut rng, sd_1);
        let m2 = gauss(&mut rng, sd_2);
        let z = gauss(&mut rng, 1.0);
        let e = gauss(&mut rng, sd_e);
        key_modulation.push(m1);
        revealed_modulation.push(m2);
        outcomes.push(root_t * (s + m1 + m2) + root_loss * z + e);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = stream_rng(config.seed, SUBSET_LABEL, trial_index);
    for i in (1..n).rev() {
        let j = shuffle.random_range(0..=i);
        order.swap(i, j);
    }
    order.truncate(config.revealed_count());

    Ok(Transmission {
        key_modulation,
        revealed_modulation,
        outcomes,
        revealed_indices: order,
    })
}

/// Estimates produced by one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// `Ĉ_MB` of the primary sample (the hidden subset for the modified scheme).
    pub covariance: f64,
    pub t_hat: f64,
    pub veps_hat: f64,
}

/// Known variance of the published modulation, and the variance of the
/// secret modulation riding on the same states.
fn primary_variances(config: &TrialConfig) -> (f64, f64) {
    match (config.scheme.kind, config.modulation) {
        (_, ModulationParams::Single { variance }) => (variance, 0.0),
        (
            SchemeKind::ModifiedDouble,
            ModulationParams::Double {
                key_variance,
                revealed_variance,
            },
        ) if config.revealed_count() == config.block_size => (key_variance + revealed_variance, 0.0),
        (
            _,
            ModulationParams::Double {
                key_variance,
                revealed_variance,
            },
        ) => (revealed_variance, key_variance),
    }
}

/// Apply the estimators of `config.scheme` to the moment sums of the
/// primary sample and, for the modified scheme, of the fully revealed one.
///
/// The modified scheme merges the two sub-ensemble estimates with the
/// minimum-variance weights of the analytic model; the excess noise of each
/// subset is evaluated at the merged transmittance.
pub fn estimate_from_moments(
    config: &TrialConfig,
    primary: &MomentSums,
    revealed: Option<&MomentSums>,
) -> Result<TrialOutcome> {
    let source = &config.source;
    let (known, hidden) = primary_variances(config);
    let covariance = primary.covariance()?;
    let merge = match (config.scheme.kind, revealed) {
        (SchemeKind::ModifiedDouble, Some(r)) if r.count > 0 && primary.count > 0 => Some(r),
        _ => None,
    };
    let Some(rev) = merge else {
        let t_hat = primary.transmittance(known)?;
        return Ok(TrialOutcome {
            covariance,
            t_hat,
            veps_hat: primary.excess_noise(t_hat, source, hidden)?,
        });
    };
    let ModulationParams::Double {
        key_variance,
        revealed_variance,
    } = config.modulation
    else {
        return Err(Error::WrongScheme { expected: "double" });
    };
    let total = config.block_size as f64;
    let ratio = rev.count as f64 / total;
    let parts = modified_double_parts(&config.channel, source, &config.modulation, total, ratio)?;
    let t_hidden = primary.transmittance(revealed_variance)?;
    let t_revealed = rev.transmittance(key_variance + revealed_variance)?;
    let w = parts.t_weight_hidden();
    let t_hat = w * t_hidden + (1.0 - w) * t_revealed;
    let v_hidden = primary.excess_noise(t_hat, source, key_variance)?;
    let v_revealed = rev.excess_noise(t_hat, source, 0.0)?;
    let u = parts.veps_weight_hidden();
    Ok(TrialOutcome {
        covariance,
        t_hat,
        veps_hat: u * v_hidden + (1.0 - u) * v_revealed,
    })
}

/// Estimates from a component-level simulation of one trial.
pub fn estimate_transmission(config: &TrialConfig, transmission: &Transmission) -> Result<TrialOutcome> {
    let primary = transmission.estimation_samples(config.scheme.kind)?.moments();
    let revealed = match config.scheme.kind {
        SchemeKind::ModifiedDouble => Some(transmission.fully_revealed_samples()?.moments()),
        _ => None,
    };
    if config.scheme.kind == SchemeKind::ModifiedDouble && primary.count == 0 {
        let all = revealed.unwrap_or_default();
        return estimate_from_moments(config, &all, None);
    }
    estimate_from_moments(config, &primary, revealed.as_ref())
}

fn draw_moments(rng: &mut ChaCha8Rng, count: usize, t: f64, known: f64, noise: f64) -> MomentSums {
    let (root_t, sd_m, sd_n) = (t.sqrt(), known.sqrt(), noise.sqrt());
    let mut sums = MomentSums::default();
    for _ in 0..count {
        let m = gauss(rng, sd_m);
        let b = root_t * m + gauss(rng, sd_n);
        sums.push(m, b);
    }
    sums
}

/// One trial through the aggregated-noise sampler.
pub fn fast_trial(config: &TrialConfig, trial_index: u64) -> Result<TrialOutcome> {
    let mut rng = stream_rng(config.seed, TRANSMISSION_LABEL, trial_index);
    let channel = &config.channel;
    let t = channel.transmittance;
    let (known, _) = primary_variances(config);
    let revealed = config.revealed_count();
    match (config.scheme.kind, config.modulation) {
        (SchemeKind::Single, _) => {
            let noise = aggregated_noise_variance(channel, &config.source);
            let sums = draw_moments(&mut rng, revealed, t, known, noise);
            estimate_from_moments(config, &sums, None)
        }
        (SchemeKind::Double, modulation) => {
            let noise = aggregated_noise_variance_double(channel, &config.source, &modulation)?;
            let sums = draw_moments(&mut rng, config.block_size, t, known, noise);
            estimate_from_moments(config, &sums, None)
        }
        (
            SchemeKind::ModifiedDouble,
            modulation @ ModulationParams::Double {
                key_variance,
                revealed_variance,
            },
        ) => {
            let open = aggregated_noise_variance(channel, &config.source);
            let full = draw_moments(&mut rng, revealed, t, key_variance + revealed_variance, open);
            if revealed == config.block_size {
                return estimate_from_moments(config, &full, None);
            }
            let noise = aggregated_noise_variance_double(channel, &config.source, &modulation)?;
            let hidden = draw_moments(&mut rng, config.block_size - revealed, t, revealed_variance, noise);
            estimate_from_moments(config, &hidden, Some(&full))
        }
        (SchemeKind::ModifiedDouble, _) => Err(Error::WrongScheme { expected: "double" }),
    }
}

/// Per-trial estimates in trial order.
pub fn trial_outcomes(config: &TrialConfig) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|i| fast_trial(config, i))
        .collect()
}

/// Per-trial estimates from the component-level sampler.
pub fn component_trial_outcomes(config: &TrialConfig) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|i| estimate_transmission(config, &simulate_transmission(config, i)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub trials: usize,
    pub mean_covariance: f64,
    pub mean_t: f64,
    /// Sample standard deviation; absent for a single trial.
    pub std_t: Option<f64>,
    pub mean_veps: f64,
    pub std_veps: Option<f64>,
    pub analytic: Option<VarianceModel>,
    pub rel_err_t: Option<f64>,
    pub rel_err_veps: Option<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, Option<f64>) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, None);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, Some((ss / (n - 1.0)).sqrt()))
}

fn rel_err(empirical: Option<f64>, analytic: f64) -> Option<f64> {
    empirical
        .filter(|_| analytic > 0.0)
        .map(|e| (e - analytic).abs() / analytic)
}

impl EmpiricalStats {
    pub fn from_outcomes(outcomes: &[TrialOutcome], analytic: Option<VarianceModel>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptySample);
        }
        let (mean_covariance, _) = mean_std(outcomes.iter().map(|o| o.covariance));
        let (mean_t, std_t) = mean_std(outcomes.iter().map(|o| o.t_hat));
        let (mean_veps, std_veps) = mean_std(outcomes.iter().map(|o| o.veps_hat));
        Ok(Self {
            trials: outcomes.len(),
            mean_covariance,
            mean_t,
            std_t,
            mean_veps,
            std_veps,
            analytic,
            rel_err_t: analytic.and_then(|a| rel_err(std_t, a.sigma())),
            rel_err_veps: analytic.and_then(|a| rel_err(std_veps, a.s())),
        })
    }
}

/// Run `config.trials` independent trials and compare with the analytic
/// model where one exists.
pub fn run_trials(config: &TrialConfig) -> Result<EmpiricalStats> {
    let outcomes = trial_outcomes(config)?;
    EmpiricalStats::from_outcomes(&outcomes, config.analytic().ok())
}

/// Settings shared by every row of a variance validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTemplate {
    pub source: SourceParams,
    /// `V` for the single scheme and `V_1` for the double ones.
    pub key_variance: f64,
    pub revealed_variance: f64,
    pub ratio: f64,
    pub fiber: FiberModel,
    pub block_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeKind>,
}

impl ValidationTemplate {
    pub fn config(&self, kind: SchemeKind, transmittance: f64, seed: u64) -> Result<TrialConfig> {
        let channel = self.fiber.channel_at_transmittance(transmittance)?;
        let modulation = match kind {
            SchemeKind::Single => ModulationParams::single(self.key_variance),
            _ => ModulationParams::double(self.key_variance, self.revealed_variance),
        };
        Ok(TrialConfig {
            channel,
            source: self.source,
            modulation,
            scheme: EstimationScheme::new(kind, self.ratio)?,
            block_size: self.block_size,
            trials: self.trials,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub scheme: SchemeKind,
    pub t: f64,
    pub m_or_n: usize,
    pub s_analytic: f64,
    pub s_empirical: f64,
    pub rel_err: f64,
    pub sigma_analytic: f64,
    pub sigma_empirical: f64,
    /// Reference excess-noise margin `sqrt(2) (1 + V_eps - T) / sqrt(N)`.
    pub veps_th: f64,
}

/// Empirical against analytic standard deviations, one row per
/// `(scheme, T)` in scheme-major order.
pub fn validate_variance_models(grid: &[f64], template: &ValidationTemplate) -> Result<Vec<ValidationRow>> {
    if grid.is_empty() {
        return Err(Error::EmptySample);
    }
    if template.trials < 2 {
        return Err(invalid("trials", template.trials as f64, "need two trials for a deviation"));
    }
    let mut rows = Vec::with_capacity(grid.len() * template.schemes.len());
    for &kind in &template.schemes {
        for (j, &t) in grid.iter().enumerate() {
            let seed = derive_seed(template.seed, ((kind as u64) << 32) | j as u64);
            let config = template.config(kind, t, seed)?;
            let stats = run_trials(&config)?;
            let analytic = config.analytic()?;
            let s_empirical = stats.std_veps.unwrap_or(0.0);
            rows.push(ValidationRow {
                scheme: kind,
                t,
                m_or_n: config.estimation_count(),
                s_analytic: analytic.s(),
                s_empirical,
                rel_err: (s_empirical - analytic.s()).abs() / analytic.s(),
                sigma_analytic: analytic.sigma(),
                sigma_empirical: stats.std_t.unwrap_or(0.0),
                veps_th: veps_theoretical(&config.channel, template.block_size as f64)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(t: f64, veps: f64, modulation: ModulationParams, scheme: EstimationScheme, n: usize) -> TrialConfig {
        TrialConfig {
            channel: ChannelParams::new(t, veps).unwrap(),
            source: SourceParams::coherent(),
            modulation,
            scheme,
            block_size: n,
            trials: 1,
            seed: 7,
        }
    }

    #[test]
    fn noiseless_vacuum_gives_zero_outcomes() {
        let mut c = config(1.0, 0.0, ModulationParams::single(0.0), EstimationScheme::single(0.5).unwrap(), 100);
        c.source = SourceParams { squeezing: 0.0 };
        // V_S = 0 is outside the model domain but exercises the sampler
        assert!(c.validate().is_err());
        let mut c = config(1.0, 0.0, ModulationParams::single(0.0), EstimationScheme::single(0.5).unwrap(), 100);
        c.source = SourceParams { squeezing: f64::MIN_POSITIVE };
        let tx = simulate_transmission(&c, 0).unwrap();
        assert!(tx.outcomes.iter().all(|b| b.abs() < 1e-100));
    }

    #[test]
    fn zero_transmittance_decouples() {
        let n = 100_000;
        let c = config(0.0, 0.01, ModulationParams::single(3.0), EstimationScheme::single(1.0).unwrap(), n);
        let tx = simulate_transmission(&c, 3).unwrap();
        let s = tx.estimation_samples(SchemeKind::Single).unwrap();
        let (mut mm, mut bb, mut mb) = (0.0, 0.0, 0.0);
        for (m, b) in s.pairs() {
            mm += m * m;
            bb += b * b;
            mb += m * b;
        }
        let corr = mb / (mm * bb).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn outcome_variance_bookkeeping() {
        let n = 200_000;
        let c = config(0.1, 0.001, ModulationParams::single(3.0), EstimationScheme::single(0.5).unwrap(), n);
        let tx = simulate_transmission(&c, 0).unwrap();
        let mean = tx.outcomes.iter().sum::<f64>() / n as f64;
        let var = tx.outcomes.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = 0.1 * 3.0 + 1.001;
        // Var of a sample variance of Gaussians: 2 σ⁴ / (n - 1)
        let se = expected * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "{var} vs {expected}");
    }

    #[test]
    fn outcomes_are_gaussian() {
        let n = 1_000_000;
        let c = config(1.0, 0.0, ModulationParams::single(0.0), EstimationScheme::single(0.5).unwrap(), n);
        let tx = simulate_transmission(&c, 11).unwrap();
        let b = &tx.outcomes;
        let mean = b.iter().sum::<f64>() / n as f64;
        let m2 = b.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let m3 = b.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
        let m4 = b.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2) - 3.0;
        assert!(skew.abs() < 0.05 && kurt.abs() < 0.1, "skew {skew} kurt {kurt}");
        assert!((m2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn revealed_subset_is_a_permutation_prefix() {
        let c = config(
            0.5,
            0.005,
            ModulationParams::double(3.0, 10.0),
            EstimationScheme::modified_double(0.3).unwrap(),
            1000,
        );
        let tx = simulate_transmission(&c, 0).unwrap();
        let mut idx = tx.revealed_indices.clone();
        assert_eq!(idx.len(), 300);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 300);
        assert_eq!(tx.estimation_samples(SchemeKind::ModifiedDouble).unwrap().len(), 700);
        assert_eq!(tx.fully_revealed_samples().unwrap().len(), 300);
        assert_ne!(tx.revealed_indices, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn single_trial_has_no_spread() {
        let c = config(0.5, 0.005, ModulationParams::single(3.0), EstimationScheme::single(0.5).unwrap(), 1000);
        let stats = run_trials(&c).unwrap();
        assert_eq!(stats.trials, 1);
        assert!(stats.std_t.is_none() && stats.std_veps.is_none());
        assert!(stats.rel_err_veps.is_none());
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let mut c = config(
            0.2,
            0.002,
            ModulationParams::double(3.0, 10.0),
            EstimationScheme::modified_double(0.5).unwrap(),
            2000,
        );
        c.trials = 50;
        let a = run_trials(&c).unwrap();
        let b = run_trials(&c).unwrap();
        assert_eq!(a, b);
        c.seed += 1;
        assert_ne!(run_trials(&c).unwrap().mean_veps, a.mean_veps);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let mut c = config(0.3, 0.003, ModulationParams::single(3.0), EstimationScheme::single(0.5).unwrap(), 1000);
        c.trials = 64;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| trial_outcomes(&c).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn endpoints_of_modified_scheme() {
        for r in [0.0, 1.0] {
            let mut c = config(
                0.3,
                0.003,
                ModulationParams::double(3.0, 10.0),
                EstimationScheme::modified_double(r).unwrap(),
                2000,
            );
            c.trials = 3;
            let fast = trial_outcomes(&c).unwrap();
            let slow = component_trial_outcomes(&c).unwrap();
            assert!(fast.iter().chain(&slow).all(|o| o.t_hat.is_finite() && o.veps_hat.is_finite()));
        }
    }
}
