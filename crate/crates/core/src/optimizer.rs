//! Key-rate optimisation over modulation variances and disclosure ratio,
//! and the scaling fits built on top of it.
//!
//! The optimiser is deterministic: a coarse grid (log-spaced in the
//! variances, `{0}` plus log-spaced in `r`) evaluated in parallel and reduced
//! in grid order, followed by coordinate-wise golden-section refinement until
//! a sweep improves the rate by less than the relative tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{expected_bounds, SchemeKind};
use crate::model::{
    ChannelParams, FiberModel, ModulationParams, ProtocolParams, SourceParams, DEFAULT_BETA, DEFAULT_DELTA,
    DEFAULT_DELTA_STAR,
};
use crate::search::{golden_section_max, log_grid};
use crate::secrecy::{
    finite_key_rate, finite_size_constant, optimal_asymptotic_rate, KeyRateOptions, KeyRateReport, LimitSource,
    QuadraturePolicy, MODULATION_RANGE,
};

/// Modulation variance of the fixed-parameter baseline.
pub const LEGACY_MODULATION: f64 = 1.5;
/// Disclosure ratio of the fixed-parameter baseline.
pub const LEGACY_RATIO: f64 = 0.5;
/// Default public modulation variance for double modulation.
pub const DEFAULT_REVEALED_VARIANCE: f64 = 10.0;
pub const REVEALED_RANGE: (f64, f64) = (0.1, 50.0);
pub const RATIO_RANGE: (f64, f64) = (0.0, 0.9);
/// Smallest positive ratio on the coarse grid.
const RATIO_GRID_FLOOR: f64 = 1e-4;
const MAX_SWEEPS: usize = 30;

/// A candidate setting. `key_variance` is `V` for single modulation and
/// `V_1` for double modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub key_variance: f64,
    pub revealed_variance: f64,
    pub ratio: f64,
}

impl Point {
    pub fn legacy() -> Self {
        Self {
            key_variance: LEGACY_MODULATION,
            revealed_variance: DEFAULT_REVEALED_VARIANCE,
            ratio: LEGACY_RATIO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    KeyVariance,
    RevealedVariance,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub channel: ChannelParams,
    pub source: SourceParams,
    pub block_size: f64,
    pub beta: f64,
    pub delta: f64,
    pub delta_star: f64,
    pub scheme: SchemeKind,
    /// Values of the fixed variables and an extra starting point.
    pub start: Point,
    pub free: Vec<Variable>,
    pub key_box: (f64, f64),
    pub revealed_box: (f64, f64),
    pub ratio_box: (f64, f64),
    /// Relative convergence tolerance on the rate.
    pub tol: f64,
    /// Additional starting points evaluated alongside the grid.
    pub seeds: Vec<Point>,
    pub options: KeyRateOptions,
    pub grid_points: usize,
}

impl OptimizationProblem {
    /// Optimise `V` (and `r` unless the scheme is plain double modulation)
    /// with default error budgets; `V_2` stays at its default.
    pub fn new(scheme: SchemeKind, channel: ChannelParams, source: SourceParams, block_size: f64) -> Self {
        let free = match scheme {
            SchemeKind::Double => vec![Variable::KeyVariance],
            _ => vec![Variable::KeyVariance, Variable::Ratio],
        };
        Self {
            channel,
            source,
            block_size,
            beta: DEFAULT_BETA,
            delta: DEFAULT_DELTA,
            delta_star: DEFAULT_DELTA_STAR,
            scheme,
            start: Point::legacy(),
            free,
            key_box: MODULATION_RANGE,
            revealed_box: REVEALED_RANGE,
            ratio_box: RATIO_RANGE,
            tol: 1e-4,
            seeds: Vec::new(),
            options: KeyRateOptions::default(),
            grid_points: 25,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_free(mut self, free: Vec<Variable>) -> Self {
        self.free = free;
        self
    }

    pub fn with_start(mut self, start: Point) -> Self {
        self.start = start;
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<Point>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if !(self.tol > 0.0) {
            return Err(invalid("tol", self.tol, "must be > 0"));
        }
        for (name, (lo, hi)) in [("V box", self.key_box), ("V_2 box", self.revealed_box)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(invalid(name, lo, "bounds must be finite, positive and ordered"));
            }
        }
        let (lo, hi) = self.ratio_box;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(invalid("r box", lo, "bounds must satisfy 0 <= lo <= hi <= 1"));
        }
        self.protocol(&self.start).map(|_| ())
    }

    fn is_free(&self, v: Variable) -> bool {
        match (self.scheme, v) {
            (SchemeKind::Single, Variable::RevealedVariance) => false,
            (SchemeKind::Double, Variable::Ratio) => false,
            _ => self.free.contains(&v),
        }
    }

    pub fn protocol(&self, point: &Point) -> Result<ProtocolParams> {
        let (modulation, ratio) = match self.scheme {
            SchemeKind::Single => (ModulationParams::single(point.key_variance), point.ratio),
            SchemeKind::Double => (ModulationParams::double(point.key_variance, point.revealed_variance), 0.0),
            SchemeKind::ModifiedDouble => {
                (ModulationParams::double(point.key_variance, point.revealed_variance), point.ratio)
            }
        };
        let params = ProtocolParams {
            source: self.source,
            modulation,
            block_size: self.block_size,
            ratio,
            beta: self.beta,
            delta: self.delta,
            delta_star: self.delta_star,
        };
        params.validate()?;
        Ok(params)
    }

    /// Planning-mode finite key rate at `point`.
    pub fn evaluate(&self, point: &Point) -> Result<KeyRateReport> {
        let params = self.protocol(point)?;
        let bounds = expected_bounds(
            &self.channel,
            &self.source,
            &params.modulation,
            &params.scheme(),
            self.block_size,
            self.delta,
        )?;
        finite_key_rate(&params, &self.channel, &bounds, self.options)
    }

    fn objective(&self, point: &Point) -> f64 {
        match self.evaluate(point) {
            Ok(r) if r.k.is_finite() => r.k,
            _ => f64::NEG_INFINITY,
        }
    }

    fn grid(&self, v: Variable) -> Vec<f64> {
        let n = self.grid_points.max(3);
        match v {
            Variable::KeyVariance => log_grid(self.key_box.0, self.key_box.1, n),
            Variable::RevealedVariance => log_grid(self.revealed_box.0, self.revealed_box.1, (n / 3).max(3)),
            Variable::Ratio => {
                let (lo, hi) = self.ratio_box;
                let mut g = Vec::with_capacity(n);
                g.push(lo);
                if hi > lo {
                    let floor = RATIO_GRID_FLOOR.max(lo).min(hi);
                    g.extend(log_grid(floor, hi, n - 1).into_iter().filter(|&r| r > lo));
                }
                g
            }
        }
    }

    fn get(p: &Point, v: Variable) -> f64 {
        match v {
            Variable::KeyVariance => p.key_variance,
            Variable::RevealedVariance => p.revealed_variance,
            Variable::Ratio => p.ratio,
        }
    }

    fn set(p: &mut Point, v: Variable, x: f64) {
        match v {
            Variable::KeyVariance => p.key_variance = x,
            Variable::RevealedVariance => p.revealed_variance = x,
            Variable::Ratio => p.ratio = x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateOutcome {
    Positive,
    /// The best rate found is not positive; the point is still the argmax.
    NoPositiveRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub outcome: RateOutcome,
    pub point: Point,
    pub rate: f64,
    /// Absent only when no candidate could be evaluated at all.
    pub report: Option<KeyRateReport>,
    pub evaluations: usize,
    pub sweeps: usize,
}

impl OptimizationResult {
    pub fn is_positive(&self) -> bool {
        self.outcome == RateOutcome::Positive
    }
}

/// Free variables in refinement order.
fn free_order(problem: &OptimizationProblem) -> Vec<Variable> {
    [Variable::KeyVariance, Variable::Ratio, Variable::RevealedVariance]
        .into_iter()
        .filter(|&v| problem.is_free(v))
        .collect()
}

fn candidate_grid(problem: &OptimizationProblem, free: &[Variable]) -> Vec<Point> {
    let mut points = vec![problem.start];
    // nested in (V, r, V_2) order so that ties resolve to the smallest V, then r
    let axis = |v: Variable| {
        if free.contains(&v) {
            problem.grid(v)
        } else {
            vec![OptimizationProblem::get(&problem.start, v)]
        }
    };
    let (vs, rs, v2s) = (
        axis(Variable::KeyVariance),
        axis(Variable::Ratio),
        axis(Variable::RevealedVariance),
    );
    let mut grid = Vec::with_capacity(vs.len() * rs.len() * v2s.len());
    for &v in &vs {
        for &r in &rs {
            for &v2 in &v2s {
                grid.push(Point {
                    key_variance: v,
                    revealed_variance: v2,
                    ratio: r,
                });
            }
        }
    }
    points.extend(grid);
    points.extend(problem.seeds.iter().copied());
    points
}

/// Strict improvement beyond rounding noise, so that ties keep the
/// earlier (smaller) candidate.
fn better(a: f64, b: f64) -> bool {
    if b.is_finite() {
        a > b + 1e-12 * b.abs()
    } else {
        a > b
    }
}

/// Improve coordinate `v` of `point` by golden section over the bracket
/// spanned by the grid neighbours of its current value. Bracket ends are
/// evaluated explicitly so that box boundaries are reachable exactly.
fn refine_coordinate(
    problem: &OptimizationProblem,
    point: &mut Point,
    value: &mut f64,
    v: Variable,
    evaluations: &mut usize,
) {
    let grid = problem.grid(v);
    let x0 = OptimizationProblem::get(point, v);
    let above = grid.iter().position(|&g| g > x0).unwrap_or(grid.len() - 1);
    let below = grid.iter().rposition(|&g| g < x0).unwrap_or(0);
    let (lo, hi) = (grid[below].min(x0), grid[above].max(x0));
    if hi <= lo {
        return;
    }
    let mut eval = |x: f64| {
        *evaluations += 1;
        let mut p = *point;
        OptimizationProblem::set(&mut p, v, x);
        problem.objective(&p)
    };
    let log_space = lo > 0.0;
    let (x, fx) = if log_space {
        let (y, fy) = golden_section_max(|y| eval(y.exp()), lo.ln(), hi.ln(), 1e-7, 200);
        (y.exp(), fy)
    } else {
        golden_section_max(&mut eval, lo, hi, 1e-9 * hi.max(1e-12), 200)
    };
    let mut candidates = vec![(lo, eval(lo)), (x, fx), (hi, eval(hi))];
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (cx, cf) in candidates {
        if better(cf, *value) {
            *value = cf;
            OptimizationProblem::set(point, v, cx);
        }
    }
}

pub fn optimize_key_rate(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let free = free_order(problem);
    let candidates = candidate_grid(problem, &free);
    let values: Vec<f64> = candidates.par_iter().map(|p| problem.objective(p)).collect();
    let mut evaluations = candidates.len();

    // the start point and seeds only win when strictly better than the grid
    let grid_end = candidates.len() - problem.seeds.len();
    let mut best = 1;
    for i in 1..grid_end {
        if better(values[i], values[best]) {
            best = i;
        }
    }
    for i in std::iter::once(0).chain(grid_end..candidates.len()) {
        if better(values[i], values[best]) {
            best = i;
        }
    }
    let mut point = candidates[best];
    let mut value = values[best];

    let mut sweeps = 0;
    if value.is_finite() {
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let before = value;
            for &v in &free {
                refine_coordinate(problem, &mut point, &mut value, v, &mut evaluations);
            }
            if value - before <= problem.tol * value.abs().max(1e-300) {
                break;
            }
        }
    }

    let report = problem.evaluate(&point).ok();
    let outcome = if value > 0.0 {
        RateOutcome::Positive
    } else {
        RateOutcome::NoPositiveRate
    };
    Ok(OptimizationResult {
        outcome,
        point,
        rate: value,
        report,
        evaluations,
        sweeps,
    })
}

/// Optimise, seeding the modified double-modulation scheme with the
/// single-modulation optimum. The modified scheme at the same `(V, r)` never
/// estimates worse, so its result is then at least the single one.
pub fn optimize_seeded(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    if problem.scheme != SchemeKind::ModifiedDouble {
        return optimize_key_rate(problem);
    }
    let single = optimize_key_rate(&OptimizationProblem {
        scheme: SchemeKind::Single,
        ..problem.clone()
    })?;
    let mut seeded = problem.clone();
    seeded.seeds.push(Point {
        revealed_variance: problem.start.revealed_variance,
        ..single.point
    });
    optimize_key_rate(&seeded)
}

/// Rate of the fixed-parameter baseline: single modulation with
/// `V = 1.5`, `r = 0.5`.
pub fn legacy_key_rate(problem: &OptimizationProblem) -> Result<KeyRateReport> {
    let legacy = OptimizationProblem {
        scheme: SchemeKind::Single,
        ..problem.clone()
    };
    legacy.evaluate(&Point::legacy())
}

/// `y ≈ alpha x^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub gamma: f64,
}

/// Least-squares line through `(x, y)`: `(slope, intercept)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::SampleLengthMismatch {
            revealed: xs.len(),
            outcomes: ys.len(),
        });
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::InsufficientData(xs.len()));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData(1));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fit `y = alpha x^gamma` on a log-log scale; non-positive pairs are skipped.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .unzip();
    let (gamma, intercept) = linear_fit(&lx, &ly)?;
    Ok(PowerLawFit {
        alpha: 10f64.powf(intercept),
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub block_size: f64,
    pub ratio: f64,
    pub rate: f64,
}

/// Optimal ratio at each block size of `sizes`, all else as in `template`.
pub fn optimal_ratios(template: &OptimizationProblem, sizes: &[f64]) -> Result<Vec<RatioPoint>> {
    sizes
        .iter()
        .map(|&n| {
            let problem = OptimizationProblem {
                block_size: n,
                ..template.clone()
            };
            let res = optimize_key_rate(&problem)?;
            Ok(RatioPoint {
                block_size: n,
                ratio: res.point.ratio,
                rate: res.rate,
            })
        })
        .collect()
}

/// Power law `r_opt ≈ alpha N^gamma` over the block sizes where the
/// optimised rate is positive.
pub fn optimal_ratio_curve(template: &OptimizationProblem, sizes: &[f64]) -> Result<(PowerLawFit, Vec<RatioPoint>)> {
    let points = optimal_ratios(template, sizes)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.rate > 0.0 && p.ratio > 0.0)
        .map(|p| (p.block_size, p.ratio))
        .unzip();
    Ok((fit_power_law(&xs, &ys)?, points))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCrossing {
    pub transmittance: f64,
    /// `(T_zero, T_positive)`: the optimal ratio is zero at the first and
    /// positive at the second.
    pub bracket: (f64, f64),
}

/// `Some(r_opt)` where the optimised rate is positive.
fn positive_ratio_at(template: &OptimizationProblem, fiber: &FiberModel, t: f64) -> Result<Option<f64>> {
    let problem = OptimizationProblem {
        channel: fiber.channel_at_transmittance(t)?,
        ..template.clone()
    };
    let res = optimize_key_rate(&problem)?;
    Ok(res.is_positive().then_some(res.point.ratio))
}

/// Transmittance below which the optimal ratio of the modified scheme is
/// exactly zero. Scans a log grid over `t_range` from high to low
/// transmittance, over points with a positive rate, and bisects in `log T`
/// between the last positive ratio and the first zero one. `None` if the
/// ratio stays positive wherever the rate is.
pub fn optimal_ratio_zero_crossing(
    template: &OptimizationProblem,
    fiber: &FiberModel,
    t_range: (f64, f64),
    grid_points: usize,
) -> Result<Option<ZeroCrossing>> {
    if template.scheme != SchemeKind::ModifiedDouble {
        return Err(Error::WrongScheme { expected: "modified double" });
    }
    let mut grid = log_grid(t_range.0, t_range.1, grid_points.max(2));
    grid.reverse();
    let ratios: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&t| positive_ratio_at(template, fiber, t))
        .collect::<Result<_>>()?;
    let found = (1..grid.len()).find(|&i| matches!((ratios[i - 1], ratios[i]), (Some(a), Some(b)) if a > 0.0 && b == 0.0));
    let Some(k) = found else {
        return Ok(None);
    };
    let (mut zero, mut positive) = (grid[k].ln(), grid[k - 1].ln());
    while positive - zero > 1e-4 {
        let mid = 0.5 * (zero + positive);
        match positive_ratio_at(template, fiber, mid.exp())? {
            Some(r) if r > 0.0 => positive = mid,
            _ => zero = mid,
        }
    }
    Ok(Some(ZeroCrossing {
        transmittance: (0.5 * (zero + positive)).exp(),
        bracket: (zero.exp(), positive.exp()),
    }))
}

/// `K_∞ ≈ a 10^(-kappa d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a: f64,
    pub kappa: f64,
    pub fit_range: (f64, f64),
    /// Largest relative deviation of the fit over the window.
    pub residual: f64,
}

impl ExponentialFit {
    pub fn new(a: f64, kappa: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("a", a, "must be > 0"));
        }
        if !(kappa > 0.0) {
            return Err(invalid("kappa", kappa, "must be > 0"));
        }
        Ok(Self {
            a,
            kappa,
            fit_range: (f64::NAN, f64::NAN),
            residual: 0.0,
        })
    }

    pub fn rate(&self, distance_km: f64) -> f64 {
        self.a * 10f64.powf(-self.kappa * distance_km)
    }
}

/// Fit `log10 K` linearly in distance.
pub fn fit_exponential(distances: &[f64], rates: &[f64]) -> Result<ExponentialFit> {
    if let Some(bad) = rates.iter().find(|&&k| !(k > 0.0)) {
        return Err(invalid("K", *bad, "exponential fit needs positive rates"));
    }
    let logs: Vec<f64> = rates.iter().map(|k| k.log10()).collect();
    let (slope, intercept) = linear_fit(distances, &logs)?;
    let mut fit = ExponentialFit::new(10f64.powf(intercept), -slope)?;
    let lo = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    fit.fit_range = (lo, hi);
    fit.residual = distances
        .iter()
        .zip(rates)
        .map(|(&d, &k)| (fit.rate(d) / k - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}

pub const DEFAULT_FIT_WINDOW: (f64, f64) = (30.0, 150.0);

/// Exponential fit of the asymptotic rate, optimised over the modulation
/// variance at each distance of a uniform grid over `window`.
pub fn fit_exponential_keyrate(
    source: LimitSource,
    fiber: &FiberModel,
    beta: f64,
    window: (f64, f64),
    points: usize,
) -> Result<ExponentialFit> {
    let distances = crate::search::linear_grid(window.0, window.1, points.max(2));
    let src = source.source();
    let rates: Vec<f64> = distances
        .par_iter()
        .map(|&d| {
            let channel = fiber.channel_at_distance(d)?;
            Ok(optimal_asymptotic_rate(&channel, &src, beta, QuadraturePolicy::Auto).1)
        })
        .collect::<Result<_>>()?;
    fit_exponential(&distances, &rates)
}

/// Necessary condition for a positive finite-size rate:
/// `d < (1 / 2kappa) log10 N - (1 / kappa) log10(c / a)` with
/// `c = 7 sqrt(log2(2 / delta*))`.
pub fn max_distance(fit: &ExponentialFit, block_size: f64, delta_star: f64) -> Result<f64> {
    if !(block_size > 0.0) {
        return Err(invalid("N", block_size, "must be > 0"));
    }
    let c = finite_size_constant(delta_star)?;
    Ok(max_distance_with_constant(fit, block_size, c))
}

pub fn max_distance_with_constant(fit: &ExponentialFit, block_size: f64, c: f64) -> f64 {
    block_size.log10() / (2.0 * fit.kappa) - (c / fit.a).log10() / fit.kappa
}
