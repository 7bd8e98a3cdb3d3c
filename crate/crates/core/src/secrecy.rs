//! Secret key rates under collective Gaussian attacks with reverse
//! reconciliation.
//!
//! Eve's information on Bob's outcome is bounded by the Holevo quantity
//! `χ_BE = S(AB) - S(A | x_B)`, computed from an entanglement-based
//! covariance matrix that reproduces the prepare-and-measure statistics.
//! The transmitted single-mode state `diag(V_x, V_p)` (source noise plus
//! modulation) is purified by a two-mode squeezed vacuum of variance
//! `μ = sqrt(V_x V_p)` followed by a local squeezer on the signal arm;
//! any other purification differs by a unitary on Alice's side and yields
//! the same entropies.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{ConfidenceBounds, SchemeKind};
use crate::model::{aggregated_noise_variance, ChannelParams, ModulationParams, ProtocolParams, SourceParams};
use crate::search;

/// Tolerance on symplectic eigenvalues slightly below the vacuum level.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Two-mode covariance matrix in mode order `(A_x, A_p, B_x, B_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix2Mode(Matrix4<f64>);

impl CovarianceMatrix2Mode {
    pub fn new(entries: Matrix4<f64>) -> Result<Self> {
        let asym = (entries - entries.transpose()).abs().max();
        let scale = entries.abs().max().max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self(entries))
    }

    pub fn from_blocks(a: Matrix2<f64>, b: Matrix2<f64>, c: Matrix2<f64>) -> Result<Self> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&c);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c.transpose());
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn alice(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn bob(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn correlations(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// Alice's mode conditioned on homodyne detection of Bob's `x`
    /// quadrature: `Γ_A - C Π C^T / (Γ_B)_xx`.
    pub fn alice_given_bob_x(&self) -> Result<Matrix2<f64>> {
        let bxx = self.0[(2, 2)];
        if !(bxx > 0.0) {
            return Err(Error::Unphysical(format!("Bob's x variance {bxx} is not positive")));
        }
        let col = self.0.fixed_view::<2, 1>(0, 2).into_owned();
        Ok(self.alice() - col * col.transpose() / bxx)
    }
}

/// Symplectic eigenvalues, clamped to at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpectrum {
    pub nus: Vec<f64>,
}

fn clamp_nu(nu: f64) -> Result<f64> {
    if !(nu >= 1.0 - PHYSICALITY_TOL) {
        return Err(Error::Unphysical(format!("symplectic eigenvalue {nu} below 1")));
    }
    Ok(nu.max(1.0))
}

/// Symplectic eigenvalues of a two-mode covariance matrix from the
/// invariants `Δ = det A + det B + 2 det C` and `det Γ`:
/// `ν±² = (Δ ± sqrt(Δ² - 4 det Γ)) / 2`.
///
/// When the `x` and `p` quadratures are uncorrelated, `Γ = X ⊕ P` and the
/// invariants are the trace and determinant of the 2×2 product `XP`. The
/// discriminant is then formed as `(m11 - m22)² + 4 m12 m21`, which stays
/// accurate near pure states where `Δ² - 4 det Γ` cancels to nothing.
pub fn symplectic_eigenvalues(gamma: &CovarianceMatrix2Mode) -> Result<SymplecticSpectrum> {
    let m = gamma.matrix();
    let sym = (m - m.transpose()).abs().max();
    if sym > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::NotSymmetric(sym));
    }
    let (delta, det, disc) = match quadrature_blocks(m) {
        Some((x, p)) => {
            let xp = x * p;
            let split = xp[(0, 0)] - xp[(1, 1)];
            (xp.trace(), x.determinant() * p.determinant(), split * split + 4.0 * xp[(0, 1)] * xp[(1, 0)])
        }
        None => {
            let delta = gamma.alice().determinant()
                + gamma.bob().determinant()
                + 2.0 * gamma.correlations().determinant();
            let det = schur_determinant(gamma)?;
            (delta, det, delta * delta - 4.0 * det)
        }
    };
    if disc < -PHYSICALITY_TOL * delta.abs().max(1.0).powi(2) {
        return Err(Error::Unphysical(format!("negative discriminant {disc:e}")));
    }
    let plus_sq = 0.5 * (delta + disc.max(0.0).sqrt());
    if !(plus_sq > 0.0) {
        return Err(Error::Unphysical(format!("invariant Δ = {delta} is not positive")));
    }
    // det Γ = ν₊² ν₋², which avoids the cancellation in Δ - sqrt(disc)
    let minus_sq = det / plus_sq;
    if minus_sq < 0.0 {
        return Err(Error::Unphysical(format!("det Γ = {det:e} is negative")));
    }
    Ok(SymplecticSpectrum {
        nus: vec![clamp_nu(plus_sq.sqrt())?, clamp_nu(minus_sq.sqrt())?],
    })
}

/// `(X, P)` mode-space blocks if no `x`–`p` cross-correlations are present.
fn quadrature_blocks(m: &Matrix4<f64>) -> Option<(Matrix2<f64>, Matrix2<f64>)> {
    let coupled = [(0, 1), (0, 3), (2, 1), (2, 3)].iter().any(|&(i, j)| m[(i, j)] != 0.0);
    if coupled {
        return None;
    }
    Some((
        Matrix2::new(m[(0, 0)], m[(0, 2)], m[(2, 0)], m[(2, 2)]),
        Matrix2::new(m[(1, 1)], m[(1, 3)], m[(3, 1)], m[(3, 3)]),
    ))
}

/// `det Γ = det A · det(B - Cᵀ A⁻¹ C)`.
fn schur_determinant(gamma: &CovarianceMatrix2Mode) -> Result<f64> {
    let a = gamma.alice();
    let c = gamma.correlations();
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::Unphysical("singular reduced state of mode A".into()))?;
    Ok(a.determinant() * (gamma.bob() - c.transpose() * inv * c).determinant())
}

/// Symplectic eigenvalue of a single-mode covariance matrix, `sqrt(det Γ)`.
pub fn single_mode_symplectic(gamma: &Matrix2<f64>) -> Result<SymplecticSpectrum> {
    let det = gamma.determinant();
    if det < 0.0 {
        return Err(Error::Unphysical(format!("single-mode determinant {det:e} is negative")));
    }
    Ok(SymplecticSpectrum {
        nus: vec![clamp_nu(det.sqrt())?],
    })
}

/// `g(x) = (x+1) log2(x+1) - x log2 x`, the entropy of a thermal state
/// with mean photon number `x`.
pub fn g_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0).log2() + x * (1.0 / x).ln_1p() / std::f64::consts::LN_2
}

/// Von Neumann entropy in bits: `Σ g((ν - 1) / 2)`.
pub fn von_neumann_entropy(spectrum: &SymplecticSpectrum) -> f64 {
    spectrum.nus.iter().map(|&nu| g_entropy((nu.max(1.0) - 1.0) / 2.0)).sum()
}

/// How the modulation is distributed over the two quadratures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraturePolicy {
    /// Symmetric for coherent sources, measured-quadrature only for squeezed ones.
    #[default]
    Auto,
    Symmetric,
    SignalOnly,
}

impl QuadraturePolicy {
    /// `(v_mod_x, v_mod_p)` for a key modulation of variance `v`.
    pub fn split(&self, source: &SourceParams, v: f64) -> (f64, f64) {
        match self {
            Self::Symmetric => (v, v),
            Self::SignalOnly => (v, 0.0),
            Self::Auto if source.is_coherent() => (v, v),
            Self::Auto => (v, 0.0),
        }
    }
}

/// Entanglement-based covariance matrix equivalent to preparing
/// `diag(V_S + v_mod_x, 1/V_S + v_mod_p)` and sending it through the channel.
pub fn build_eb_covariance(
    channel: &ChannelParams,
    source: &SourceParams,
    v_mod_x: f64,
    v_mod_p: f64,
) -> Result<CovarianceMatrix2Mode> {
    if !(v_mod_x >= 0.0 && v_mod_p >= 0.0) {
        return Err(invalid("v_mod", v_mod_x.min(v_mod_p), "modulation variances must be >= 0"));
    }
    let vx = source.squeezing + v_mod_x;
    let vp = 1.0 / source.squeezing + v_mod_p;
    let mu = (vx * vp).sqrt();
    if !(mu >= 1.0 - PHYSICALITY_TOL) {
        return Err(invalid("mu", mu, "transmitted state violates the uncertainty relation"));
    }
    let mu = mu.max(1.0);
    let t = channel.transmittance;
    let add = 1.0 - t + channel.excess_noise;
    let squeeze = (vx / mu).sqrt();
    let corr = t.sqrt() * (mu * mu - 1.0).sqrt();
    CovarianceMatrix2Mode::from_blocks(
        Matrix2::new(mu, 0.0, 0.0, mu),
        Matrix2::new(t * vx + add, 0.0, 0.0, t * vp + add),
        Matrix2::new(corr * squeeze, 0.0, 0.0, -corr / squeeze),
    )
}

/// `I(A:B) = ½ log2(1 + V T / V_N)`.
pub fn mutual_information(channel: &ChannelParams, source: &SourceParams, v_key: f64) -> f64 {
    let noise = aggregated_noise_variance(channel, source);
    0.5 * (v_key * channel.transmittance / noise).ln_1p() / std::f64::consts::LN_2
}

/// Holevo bound on Eve's information about Bob's `x` outcome.
pub fn holevo_bound(
    channel: &ChannelParams,
    source: &SourceParams,
    v_mod_x: f64,
    v_mod_p: f64,
) -> Result<f64> {
    let gamma = build_eb_covariance(channel, source, v_mod_x, v_mod_p)?;
    let s_ab = von_neumann_entropy(&symplectic_eigenvalues(&gamma)?);
    let s_a_given_b = von_neumann_entropy(&single_mode_symplectic(&gamma.alice_given_bob_x()?)?);
    Ok(s_ab - s_a_given_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRate {
    pub mutual_information: f64,
    pub holevo: f64,
    pub rate: f64,
}

/// `K_∞ = β I(A:B) - χ_BE` for key modulation variance `v_key`.
pub fn asymptotic_rate_parts(
    channel: &ChannelParams,
    source: &SourceParams,
    v_key: f64,
    beta: f64,
    policy: QuadraturePolicy,
) -> Result<AsymptoticRate> {
    let (vx, vp) = policy.split(source, v_key);
    let mutual_information = mutual_information(channel, source, v_key);
    let holevo = holevo_bound(channel, source, vx, vp)?;
    Ok(AsymptoticRate {
        mutual_information,
        holevo,
        rate: beta * mutual_information - holevo,
    })
}

/// Asymptotic key rate with the default quadrature policy. The second
/// modulation of a double-modulation scheme is public and drops out, so
/// only the key modulation matters.
pub fn asymptotic_key_rate(
    channel: &ChannelParams,
    source: &SourceParams,
    modulation: &ModulationParams,
    beta: f64,
) -> Result<f64> {
    Ok(asymptotic_rate_parts(channel, source, modulation.key_variance(), beta, QuadraturePolicy::Auto)?.rate)
}

/// `Δ(n) ≈ 7 sqrt(log2(2/δ*) / n)`.
pub fn finite_size_correction(n: f64, delta_star: f64) -> Result<f64> {
    if !(n > 0.0) {
        return Err(invalid("n", n, "needs at least one key state"));
    }
    if !(delta_star > 0.0 && delta_star < 1.0) {
        return Err(invalid("delta*", delta_star, "must lie in (0, 1)"));
    }
    Ok(7.0 * ((2.0 / delta_star).log2() / n).sqrt())
}

/// Prefactor `c` in `Δ(n) = c / sqrt(n)`.
pub fn finite_size_constant(delta_star: f64) -> Result<f64> {
    finite_size_correction(1.0, delta_star)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerMode {
    /// `(T_low, V_eps_up)`.
    #[default]
    Pessimistic,
    /// Minimise `K_∞` over the four corners of the confidence box.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCorner {
    pub transmittance: f64,
    pub excess_noise: f64,
    /// False when the exhaustive search found a corner other than
    /// `(T_low, V_eps_up)`.
    pub matches_pessimistic: bool,
}

impl WorstCorner {
    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            transmittance: self.transmittance,
            excess_noise: self.excess_noise,
        }
    }
}

fn clamp_point(t: f64, veps: f64) -> (f64, f64) {
    (t.clamp(0.0, 1.0), veps.max(0.0))
}

/// Evaluation point for `K_∞` inside the confidence box. Estimates outside
/// the physical domain are clamped (`T ∈ [0, 1]`, `V_eps ≥ 0`).
pub fn worst_case_corner<F>(bounds: &ConfidenceBounds, mode: CornerMode, mut rate: F) -> Result<WorstCorner>
where
    F: FnMut(&ChannelParams) -> Result<f64>,
{
    let (t, v) = clamp_point(bounds.t_low, bounds.veps_up);
    let pessimistic = WorstCorner {
        transmittance: t,
        excess_noise: v,
        matches_pessimistic: true,
    };
    if mode == CornerMode::Pessimistic {
        return Ok(pessimistic);
    }
    let mut best = pessimistic;
    let mut best_rate = rate(&pessimistic.channel())?;
    for (tc, vc) in [
        (bounds.t_up(), bounds.veps_up),
        (bounds.t_low, bounds.veps_low()),
        (bounds.t_up(), bounds.veps_low()),
    ] {
        let (tc, vc) = clamp_point(tc, vc);
        let corner = WorstCorner {
            transmittance: tc,
            excess_noise: vc,
            matches_pessimistic: false,
        };
        let k = rate(&corner.channel())?;
        if k < best_rate {
            best = corner;
            best_rate = k;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyRateOptions {
    pub quadratures: QuadraturePolicy,
    pub corner: CornerMode,
}

/// Everything that went into one finite-size key rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub scheme: SchemeKind,
    pub params: ProtocolParams,
    pub channel: ChannelParams,
    /// Asymptotic rate at the true channel parameters.
    pub k_inf: f64,
    /// Asymptotic rate at the worst-case corner; the one entering `k`.
    pub k_inf_worst: f64,
    /// Mutual information at the worst-case corner.
    pub i_ab: f64,
    /// Holevo bound at the worst-case corner.
    pub chi_be: f64,
    pub delta_n: f64,
    pub t_low: f64,
    pub veps_up: f64,
    pub corner: WorstCorner,
    /// Key states.
    pub n: f64,
    /// Estimation states.
    pub m: f64,
    /// Final rate in bits per channel use; negative means insecure.
    pub k: f64,
}

impl KeyRateReport {
    pub fn is_secure(&self) -> bool {
        self.k > 0.0
    }
}

fn check_bookkeeping(params: &ProtocolParams, n: f64, m: f64) -> Result<()> {
    let total = params.block_size;
    let ok = match params.modulation {
        ModulationParams::Single { .. } => (n + m - total).abs() <= 1e-9 * total,
        ModulationParams::Double { .. } => (m - total).abs() <= 1e-9 * total,
    };
    if !ok || n < 0.0 || m < 0.0 || n > total * (1.0 + 1e-12) {
        return Err(Error::Bookkeeping { n, m, total });
    }
    Ok(())
}

/// `K = (n/N) [K_∞(T_low, V_eps_up) - Δ(n)]`.
pub fn finite_key_rate(
    params: &ProtocolParams,
    channel: &ChannelParams,
    bounds: &ConfidenceBounds,
    options: KeyRateOptions,
) -> Result<KeyRateReport> {
    let (n, m) = params.state_counts();
    finite_key_rate_with_counts(params, channel, bounds, options, n, m)
}

/// As [`finite_key_rate`] with explicit state counts; `n = N` together with
/// exact bounds gives the ideal-estimation limit.
pub fn finite_key_rate_with_counts(
    params: &ProtocolParams,
    channel: &ChannelParams,
    bounds: &ConfidenceBounds,
    options: KeyRateOptions,
    n: f64,
    m: f64,
) -> Result<KeyRateReport> {
    params.validate()?;
    if n + m > 0.0 && !(n == params.block_size && bounds.t_halfwidth == 0.0 && bounds.veps_halfwidth == 0.0) {
        check_bookkeeping(params, n, m)?;
    }
    let v_key = params.modulation.key_variance();
    let source = params.source;
    let rate_at = |c: &ChannelParams| {
        asymptotic_rate_parts(c, &source, v_key, params.beta, options.quadratures).map(|r| r.rate)
    };
    let corner = worst_case_corner(bounds, options.corner, rate_at)?;
    let worst = asymptotic_rate_parts(&corner.channel(), &source, v_key, params.beta, options.quadratures)?;
    let k_inf = rate_at(channel)?;
    let (delta_n, k) = if n > 0.0 {
        let d = finite_size_correction(n, params.delta_star)?;
        (d, n / params.block_size * (worst.rate - d))
    } else {
        (f64::INFINITY, 0.0)
    };
    Ok(KeyRateReport {
        scheme: params.scheme().kind,
        params: *params,
        channel: *channel,
        k_inf,
        k_inf_worst: worst.rate,
        i_ab: worst.mutual_information,
        chi_be: worst.holevo,
        delta_n,
        t_low: bounds.t_low,
        veps_up: bounds.veps_up,
        corner,
        n,
        m,
        k,
    })
}

/// `V_eps^up ≈ sqrt(2) (1 + V_eps + T (V_M + V_S - 1)) / sqrt(m)`, where
/// `V_M` is the part of the modulation that stays hidden during estimation.
pub fn veps_up_approx(channel: &ChannelParams, source: &SourceParams, hidden_modulation: f64, m: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(invalid("m", m, "needs at least one state"));
    }
    Ok(std::f64::consts::SQRT_2
        * (1.0 + channel.excess_noise + channel.transmittance * (hidden_modulation + source.squeezing - 1.0))
        / m.sqrt())
}

/// Best achievable excess-noise margin: `sqrt(2) (1 + V_eps - T) / sqrt(N)`.
pub fn veps_theoretical(channel: &ChannelParams, total: f64) -> Result<f64> {
    if !(total >= 1.0) {
        return Err(invalid("N", total, "needs at least one state"));
    }
    Ok(std::f64::consts::SQRT_2 * (1.0 + channel.excess_noise - channel.transmittance) / total.sqrt())
}

/// Squeezed variance standing in for infinitely strong squeezing.
///
/// The key rate converges as `V_S → 0`; at this level it has settled to
/// well below the optimiser tolerance.
pub const STRONG_SQUEEZING_LIMIT: f64 = 1e-6;

/// Source used by the theoretical limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitSource {
    Given(SourceParams),
    InfiniteSqueezing,
}

impl LimitSource {
    pub fn source(&self) -> SourceParams {
        match *self {
            Self::Given(s) => s,
            Self::InfiniteSqueezing => SourceParams {
                squeezing: STRONG_SQUEEZING_LIMIT,
            },
        }
    }
}

/// Modulation-variance box searched by the rate optimisers.
pub const MODULATION_RANGE: (f64, f64) = (0.01, 100.0);

/// Asymptotic rate maximised over the key modulation variance.
pub fn optimal_asymptotic_rate(
    channel: &ChannelParams,
    source: &SourceParams,
    beta: f64,
    policy: QuadraturePolicy,
) -> (f64, f64) {
    let f = |v: f64| {
        asymptotic_rate_parts(channel, source, v, beta, policy)
            .map(|r| r.rate)
            .unwrap_or(f64::NEG_INFINITY)
    };
    search::maximize_log_scale(f, MODULATION_RANGE.0, MODULATION_RANGE.1, 41)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalLimit {
    pub k_th: f64,
    pub veps_th: f64,
    pub modulation: f64,
    pub delta: f64,
}

/// Ceiling on the finite-size rate: every state used for both key and
/// estimation, with the smallest possible excess-noise margin added to the
/// true excess noise, and the modulation chosen optimally.
pub fn theoretical_key_rate_limit(
    channel: &ChannelParams,
    total: f64,
    beta: f64,
    delta_star: f64,
    source: LimitSource,
    policy: QuadraturePolicy,
) -> Result<TheoreticalLimit> {
    let veps_th = veps_theoretical(channel, total)?;
    let delta = finite_size_correction(total, delta_star)?;
    let eval = ChannelParams {
        transmittance: channel.transmittance,
        excess_noise: channel.excess_noise + veps_th,
    };
    let (modulation, k_inf) = optimal_asymptotic_rate(&eval, &source.source(), beta, policy);
    Ok(TheoreticalLimit {
        k_th: k_inf - delta,
        veps_th,
        modulation,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{confidence_bounds, expected_bounds, EstimationScheme, VarianceModel};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn ch(t: f64, v: f64) -> ChannelParams {
        ChannelParams::new(t, v).unwrap()
    }

    /// Symplectic spectrum as the moduli of the eigenvalues of `iΩΓ`,
    /// i.e. the positive square roots of the eigenvalues of `-(ΩΓ)²`.
    fn symplectic_oracle(gamma: &Matrix4<f64>) -> Vec<f64> {
        let mut omega = Matrix4::zeros();
        omega[(0, 1)] = 1.0;
        omega[(1, 0)] = -1.0;
        omega[(2, 3)] = 1.0;
        omega[(3, 2)] = -1.0;
        let og = omega * gamma;
        let sq = -(og * og);
        let eig = DMatrix::from_fn(4, 4, |i, j| sq[(i, j)]).complex_eigenvalues();
        let mut nus: Vec<f64> = eig.iter().map(|z| z.re.max(0.0).sqrt()).collect();
        nus.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // each eigenvalue appears twice
        vec![nus[0], nus[2]]
    }

    #[test]
    fn eb_vacuum() {
        let g = build_eb_covariance(&ch(1.0, 0.0), &SourceParams::coherent(), 0.0, 0.0).unwrap();
        assert_relative_eq!(*g.matrix(), Matrix4::identity(), epsilon = 1e-15);
    }

    #[test]
    fn eb_two_mode_squeezed() {
        let g = build_eb_covariance(&ch(1.0, 0.0), &SourceParams::coherent(), 3.0, 3.0).unwrap();
        assert_relative_eq!(g.alice(), Matrix2::identity() * 4.0, epsilon = 1e-14);
        assert_relative_eq!(g.bob(), Matrix2::identity() * 4.0, epsilon = 1e-14);
        let c = 15f64.sqrt();
        assert_relative_eq!(g.correlations(), Matrix2::new(c, 0.0, 0.0, -c), epsilon = 1e-14);
    }

    #[test]
    fn eb_asymmetric_squeezed_blocks() {
        let g = build_eb_covariance(&ch(0.5, 0.01), &SourceParams::new(0.5).unwrap(), 3.0, 0.0).unwrap();
        assert_relative_eq!(g.bob()[(0, 0)], 2.26, epsilon = 1e-14);
        assert_relative_eq!(g.bob()[(1, 1)], 1.51, epsilon = 1e-14);
        // mu = sqrt(3.5 * 2), t = sqrt(3.5 / mu)
        let mu = 7f64.sqrt();
        let t = (3.5 / mu).sqrt();
        let c = 0.5f64.sqrt() * (mu * mu - 1.0).sqrt();
        assert_relative_eq!(g.alice(), Matrix2::identity() * mu, epsilon = 1e-14);
        assert_relative_eq!(g.correlations(), Matrix2::new(c * t, 0.0, 0.0, -c / t), epsilon = 1e-14);
    }

    #[test]
    fn eb_matches_prepare_and_measure_moments() {
        // Bob's x variance is T V + V_N, and conditioning on a homodyne of
        // Alice's x leaves exactly the aggregated noise V_N of the P&M model.
        for &(t, veps, vs, v) in &[(0.3, 0.02, 0.5, 4.0), (0.9, 0.0, 1.0, 1.5), (0.05, 1e-3, 0.1, 10.0)] {
            let c = ch(t, veps);
            let s = SourceParams::new(vs).unwrap();
            let g = build_eb_covariance(&c, &s, v, 0.0).unwrap();
            let noise = aggregated_noise_variance(&c, &s);
            assert_relative_eq!(g.bob()[(0, 0)], t * v + noise, max_relative = 1e-13);
            let cx = g.correlations()[(0, 0)];
            let cond = g.bob()[(0, 0)] - cx * cx / g.alice()[(0, 0)];
            assert_relative_eq!(cond, noise, max_relative = 1e-12);
        }
    }

    #[test]
    fn symplectic_identity_and_pure_state() {
        let id = CovarianceMatrix2Mode::new(Matrix4::identity()).unwrap();
        let s = symplectic_eigenvalues(&id).unwrap();
        assert_relative_eq!(s.nus[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.nus[1], 1.0, epsilon = 1e-12);
        let tmsv = build_eb_covariance(&ch(1.0, 0.0), &SourceParams::coherent(), 20.0, 20.0).unwrap();
        let s = symplectic_eigenvalues(&tmsv).unwrap();
        assert!((s.nus[0] - 1.0).abs() < 1e-9 && (s.nus[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symplectic_matches_eigensolver_oracle() {
        for &(t, veps, vs, vx, vp) in &[
            (0.5, 0.01, 1.0, 3.0, 3.0),
            (0.03, 3e-4, 0.1, 5.0, 0.0),
            (0.8, 0.2, 0.5, 1.0, 0.3),
            (0.001, 0.0, 1.0, 40.0, 40.0),
        ] {
            let g = build_eb_covariance(&ch(t, veps), &SourceParams::new(vs).unwrap(), vx, vp).unwrap();
            let ours = symplectic_eigenvalues(&g).unwrap();
            let oracle = symplectic_oracle(g.matrix());
            for (a, b) in ours.nus.iter().zip(&oracle) {
                assert_relative_eq!(*a, *b, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn symplectic_rejects_bad_matrices() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 0.5;
        assert!(matches!(CovarianceMatrix2Mode::new(m), Err(Error::NotSymmetric(_))));
        let half = CovarianceMatrix2Mode::new(Matrix4::identity() * 0.5).unwrap();
        assert!(matches!(symplectic_eigenvalues(&half), Err(Error::Unphysical(_))));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(von_neumann_entropy(&SymplecticSpectrum { nus: vec![1.0, 1.0] }), 0.0);
        assert_relative_eq!(von_neumann_entropy(&SymplecticSpectrum { nus: vec![3.0] }), 2.0, epsilon = 1e-14);
        // g(0.5) = 1.5 log2 1.5 - 0.5 log2 0.5, g(2) = 3 log2 3 - 2
        let expected = 1.5 * 1.5f64.log2() + 0.5 + 3.0 * 3f64.log2() - 2.0;
        assert_relative_eq!(
            von_neumann_entropy(&SymplecticSpectrum { nus: vec![2.0, 5.0] }),
            expected,
            epsilon = 1e-14
        );
        // clamped sub-vacuum rounding
        assert_eq!(von_neumann_entropy(&SymplecticSpectrum { nus: vec![1.0 - 1e-12] }), 0.0);
        assert!(g_entropy(1e6).is_finite());
    }

    #[test]
    fn mutual_information_values() {
        let coherent = SourceParams::coherent();
        assert_eq!(mutual_information(&ch(0.4, 0.01), &coherent, 0.0), 0.0);
        assert_relative_eq!(mutual_information(&ch(0.1, 0.0), &coherent, 3.0), 0.5 * 1.3f64.log2(), epsilon = 1e-15);
        assert!((mutual_information(&ch(0.1, 0.0), &coherent, 3.0) - 0.18926).abs() < 1e-5);
        assert_relative_eq!(mutual_information(&ch(1.0, 0.0), &coherent, 3.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn holevo_vanishes_for_pure_channel_and_dark_channel() {
        for &(vs, vx, vp) in &[(1.0, 3.0, 3.0), (0.1, 5.0, 0.0), (0.5, 0.0, 0.0), (2.0, 1.0, 7.0)] {
            let chi = holevo_bound(&ch(1.0, 0.0), &SourceParams::new(vs).unwrap(), vx, vp).unwrap();
            assert!(chi.abs() < 1e-9, "chi = {chi}");
        }
        let chi = holevo_bound(&ch(1e-9, 0.0), &SourceParams::coherent(), 3.0, 3.0).unwrap();
        assert!(chi.abs() < 1e-6, "chi = {chi}");
    }

    #[test]
    fn key_rate_lossless_examples() {
        let c = ch(1.0, 0.0);
        let s = SourceParams::coherent();
        let m = ModulationParams::single(3.0);
        assert_relative_eq!(asymptotic_key_rate(&c, &s, &m, 1.0).unwrap(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(asymptotic_key_rate(&c, &s, &m, 0.95).unwrap(), 0.95, epsilon = 1e-9);
    }

    #[test]
    fn strongly_squeezed_rate_positive_at_76km() {
        let c = ch(0.03, 3e-4);
        let s = SourceParams::new(0.1).unwrap();
        let (_, k) = optimal_asymptotic_rate(&c, &s, 0.95, QuadraturePolicy::Auto);
        assert!(k > 1e-3, "K_inf = {k}");
    }

    #[test]
    fn finite_size_correction_values() {
        assert!(finite_size_correction(1e18, 1e-10).unwrap() < 1e-7);
        let d = finite_size_correction(1e6, 1e-10).unwrap();
        assert!((d - 0.04095).abs() < 1e-5, "{d}");
        let n = 12345.0;
        assert_relative_eq!(
            finite_size_correction(4.0 * n, 1e-10).unwrap(),
            finite_size_correction(n, 1e-10).unwrap() / 2.0,
            max_relative = 1e-15
        );
        assert!(finite_size_correction(0.0, 1e-10).is_err());
    }

    fn protocol(m: ModulationParams, n: f64, r: f64) -> ProtocolParams {
        ProtocolParams::new(SourceParams::coherent(), m, n, r).unwrap()
    }

    #[test]
    fn finite_rate_ideal_limit() {
        let c = ch(0.4, 0.004);
        let p = protocol(ModulationParams::single(4.0), 1e8, 0.1);
        let r = finite_key_rate_with_counts(&p, &c, &ConfidenceBounds::exact(&c), KeyRateOptions::default(), 1e8, 0.0)
            .unwrap();
        assert_relative_eq!(r.k, r.k_inf - finite_size_correction(1e8, 1e-10).unwrap(), epsilon = 1e-14);
        assert_eq!(r.k_inf, r.k_inf_worst);
    }

    #[test]
    fn finite_rate_full_disclosure_is_zero() {
        let c = ch(0.4, 0.004);
        let p = protocol(ModulationParams::single(4.0), 1e6, 1.0);
        let b = expected_bounds(&c, &p.source, &p.modulation, &p.scheme(), p.block_size, p.delta).unwrap();
        let r = finite_key_rate(&p, &c, &b, KeyRateOptions::default()).unwrap();
        assert_eq!(r.k, 0.0);
        assert_eq!(r.n, 0.0);
    }

    #[test]
    fn finite_rate_fields_recombine() {
        let c = ch(0.2, 0.002);
        let p = protocol(ModulationParams::single(2.0), 1e7, 0.3);
        let b = expected_bounds(&c, &p.source, &p.modulation, &p.scheme(), p.block_size, p.delta).unwrap();
        let r = finite_key_rate(&p, &c, &b, KeyRateOptions::default()).unwrap();
        assert_eq!(r.k, r.n / p.block_size * (r.k_inf_worst - r.delta_n));
        assert_eq!(r.k_inf_worst, 0.95 * r.i_ab - r.chi_be);
        assert!(r.k < r.k_inf);
        assert_eq!((r.t_low, r.veps_up), (b.t_low, b.veps_up));
    }

    #[test]
    fn finite_rate_rejects_bad_bookkeeping() {
        let c = ch(0.2, 0.002);
        let p = protocol(ModulationParams::single(2.0), 1e7, 0.3);
        let b = expected_bounds(&c, &p.source, &p.modulation, &p.scheme(), p.block_size, p.delta).unwrap();
        let err = finite_key_rate_with_counts(&p, &c, &b, KeyRateOptions::default(), 8e6, 3e6);
        assert!(matches!(err, Err(Error::Bookkeeping { .. })));
    }

    #[test]
    fn corner_modes() {
        let c = ch(0.2, 0.002);
        let s = SourceParams::coherent();
        let p = protocol(ModulationParams::single(2.0), 1e6, 0.5);
        let rate = |x: &ChannelParams| asymptotic_key_rate(x, &s, &p.modulation, 0.95);
        let b = expected_bounds(&c, &s, &p.modulation, &p.scheme(), p.block_size, p.delta).unwrap();
        let d = worst_case_corner(&b, CornerMode::Pessimistic, rate).unwrap();
        assert_eq!((d.transmittance, d.excess_noise), (b.t_low, b.veps_up));
        let e = worst_case_corner(&b, CornerMode::Exhaustive, rate).unwrap();
        assert!(e.matches_pessimistic);

        let zero = ConfidenceBounds::exact(&c);
        let z = worst_case_corner(&zero, CornerMode::Exhaustive, rate).unwrap();
        assert_eq!((z.transmittance, z.excess_noise), (0.2, 0.002));
    }

    #[test]
    fn exhaustive_corner_agrees_on_grid() {
        let fiber = crate::model::FiberModel::default();
        for d in [10.0, 40.0, 80.0] {
            for vs in [1.0, 0.5, 0.1] {
                let c = fiber.channel_at_distance(d).unwrap();
                let s = SourceParams::new(vs).unwrap();
                let m = ModulationParams::single(3.0);
                let b = expected_bounds(&c, &s, &m, &EstimationScheme::single(0.3).unwrap(), 1e6, 2e-10).unwrap();
                let rate = |x: &ChannelParams| asymptotic_key_rate(x, &s, &m, 0.95);
                let e = worst_case_corner(&b, CornerMode::Exhaustive, rate).unwrap();
                assert!(e.matches_pessimistic, "d={d} V_S={vs}");
            }
        }
    }

    #[test]
    fn theoretical_limit_values() {
        let c = ch(0.03, 3e-4);
        let th = veps_theoretical(&c, 1e6).unwrap();
        assert!((th - 1.372e-3).abs() < 1e-6, "{th}");
        let lim = theoretical_key_rate_limit(&c, 1e30, 0.95, 1e-10, LimitSource::Given(SourceParams::coherent()), QuadraturePolicy::Auto)
            .unwrap();
        let (_, k_inf) = optimal_asymptotic_rate(&c, &SourceParams::coherent(), 0.95, QuadraturePolicy::Auto);
        assert!((lim.k_th - k_inf).abs() < 1e-9);
    }

    #[test]
    fn veps_up_approx_values() {
        let n = 1e6;
        let zero = veps_up_approx(&ch(0.0, 0.0), &SourceParams::coherent(), 3.0, n).unwrap();
        assert_relative_eq!(zero, veps_theoretical(&ch(0.0, 0.0), n).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(zero, 2f64.sqrt() / 1e3, max_relative = 1e-15);
        let v = veps_up_approx(&ch(0.5, 0.0), &SourceParams::coherent(), 0.0, n).unwrap();
        assert_relative_eq!(v, 1.414_213_562e-3, max_relative = 1e-9);
        for t in [0.01, 0.1, 0.5, 1.0] {
            let c = ch(t, 0.01 * t);
            let half = veps_up_approx(&c, &SourceParams::coherent(), 0.0, n / 2.0).unwrap();
            assert!(half > 2f64.sqrt() * veps_theoretical(&c, n).unwrap());
        }
        // hidden modulation, m = N: approaches the ceiling as T -> 0
        let c = ch(1e-6, 1e-8);
        let hidden = veps_up_approx(&c, &SourceParams::coherent(), 3.0, n).unwrap();
        assert_relative_eq!(hidden, veps_theoretical(&c, n).unwrap(), max_relative = 1e-5);
    }

    #[test]
    fn pessimistic_bounds_lower_rate() {
        let c = ch(0.3, 0.003);
        let p = protocol(ModulationParams::single(3.0), 1e6, 0.4);
        let model = VarianceModel { sigma_sq: 1e-6, s_sq: 1e-6 };
        let b = confidence_bounds(0.3, 0.003, &model, 2e-10).unwrap();
        let r = finite_key_rate(&p, &c, &b, KeyRateOptions::default()).unwrap();
        assert!(r.k_inf_worst < r.k_inf);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn holevo_non_negative(
            t in 0.0f64..=1.0, veps in 0.0f64..0.5, vs in 0.05f64..1.0, v in 0.0f64..50.0, sym in proptest::bool::ANY,
        ) {
            let s = SourceParams::new(vs).unwrap();
            let vp = if sym { v } else { 0.0 };
            let chi = holevo_bound(&ch(t, veps), &s, v, vp).unwrap();
            prop_assert!(chi >= -1e-9, "chi = {}", chi);
        }

        #[test]
        fn purity_at_lossless_noiseless(vs in 0.05f64..3.0, vx in 0.0f64..50.0, vp in 0.0f64..50.0) {
            let g = build_eb_covariance(&ch(1.0, 0.0), &SourceParams::new(vs).unwrap(), vx, vp).unwrap();
            let s = symplectic_eigenvalues(&g).unwrap();
            prop_assert!((s.nus[0] - 1.0).abs() < 1e-9 && (s.nus[1] - 1.0).abs() < 1e-9);
            prop_assert!(von_neumann_entropy(&s) < 1e-7);
        }

        #[test]
        fn rate_monotone_in_noise_and_beta(t in 0.01f64..1.0, veps in 0.0f64..0.1, v in 0.1f64..20.0, beta in 0.5f64..0.99) {
            let s = SourceParams::coherent();
            let m = ModulationParams::single(v);
            let k = |veps: f64, beta: f64| asymptotic_key_rate(&ch(t, veps), &s, &m, beta).unwrap();
            prop_assert!(k(veps + 1e-3, beta) <= k(veps, beta) + 1e-12);
            prop_assert!(k(veps, beta + 0.01) >= k(veps, beta) - 1e-12);
        }
    }
}
